#ifndef SUBJQA_PIPELINE_HPP_
#define SUBJQA_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace subjqa {

class AnnotationServer;

// Flat key=value configuration. Every key has a default; unknown keys are
// rejected so typos do not pass silently.
class PipelineConfig {
 public:
  PipelineConfig();

  // "key = value" lines, '#' comments.
  static PipelineConfig parse(std::string_view contents);
  static PipelineConfig load(const std::filesystem::path& path);

  // Throws Error(kConfig) for an unknown key.
  void set(const std::string& key, const std::string& value);
  bool is_set(const std::string& key) const;  // differs from the default

  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;

  // Checks every value against its module's preconditions.
  void validate() const;
  // sha256 of the canonical key=value listing.
  std::string hash() const;
  std::string canonical() const;

  static const std::vector<std::pair<std::string, std::string>>& defaults();

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> kStages = {
      "ingest", "extract", "factorize", "neighborhood", "topics",  "pair",
      "tasks",  "serve",   "assemble",  "analyze",      "train",   "evaluate"};
  return kStages;
}

struct StageOptions {
  // Called once the annotation server is bound (serve with serve_port set);
  // the stage returns after the server is stopped.
  std::function<void(AnnotationServer&, int port)> on_listen;
  // Progress lines for humans.
  std::function<void(const std::string&)> log;
};

struct StageResult {
  std::string stage;
  std::filesystem::path manifest_path;
  std::string manifest_json;
  std::vector<std::filesystem::path> outputs;
};

// Runs one stage. Throws Error(kMissingStage) naming the stage that must run
// first when an upstream artifact is absent.
StageResult run_stage(const std::string& stage, const PipelineConfig& config,
                      const std::filesystem::path& out_dir,
                      const StageOptions& options = {});

}  // namespace subjqa

#endif  // SUBJQA_PIPELINE_HPP_
