#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "subjqa/common.hpp"

using namespace subjqa;

TEST_SUITE("common") {

TEST_CASE("sha256 and fnv1a known vectors") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("rng streams are reproducible and in range") {
  Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = r.uniform_open_closed();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    CHECK(r.below(3) < 3);
  }
  CHECK_THROWS_AS(r.below(0), Error);
}

TEST_CASE("below covers every value") {
  Rng r(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 200; ++i) seen.insert(r.below(5));
  CHECK(seen.size() == 5);
}

TEST_CASE("mix_seed separates salts") {
  CHECK(mix_seed(1, 1) != mix_seed(1, 2));
  CHECK(mix_seed(1, 1) != mix_seed(2, 1));
  CHECK(mix_seed(5, 9) == mix_seed(5, 9));
}

TEST_CASE("string helpers") {
  CHECK(to_lower_ascii("AbC Ü") == "abc Ü");
  CHECK(trim("  a b \t\n") == "a b");
  CHECK(trim("") == "");
}

TEST_CASE("file round trip and missing file") {
  fixture::TempDir tmp("common");
  write_file(tmp / "sub/x.txt", "hello\n");
  CHECK(read_file(tmp / "sub/x.txt") == "hello\n");
  try {
    read_file(tmp / "nope.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInput);
  }
}

TEST_CASE("numerical error carries location") {
  NumericalError e("nmf update", 12);
  CHECK(e.kind() == ErrorKind::kNumerical);
  CHECK(e.where() == "nmf update");
  CHECK(e.index() == 12);
  CHECK(std::string(e.what()).find("12") != std::string::npos);
}

}
