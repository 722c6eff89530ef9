// subjqa: runs the dataset pipeline one stage at a time.
//
//   subjqa <stage> [--config FILE] [--out DIR] [--seed N] [--set key=value]...
//   subjqa all ...          every stage from ingest to evaluate, in order
//   subjqa config ...       prints the effective configuration
//
// Exit status: 0 ok, 2 bad usage or configuration, 3 an upstream stage has
// not run, 1 anything else.

#include <csignal>
#include <iostream>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "subjqa/common.hpp"
#include "subjqa/pipeline.hpp"
#include "subjqa/server.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out = "subjqa-out";
  std::string seed;
  std::vector<std::string> sets;
  bool manifest_only = false;
  int port = -1;
  std::string phase;
};

subjqa::PipelineConfig make_config(const Common& o) {
  subjqa::PipelineConfig c = o.config_path.empty()
                                 ? subjqa::PipelineConfig()
                                 : subjqa::PipelineConfig::load(o.config_path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw subjqa::Error(subjqa::ErrorKind::kConfig,
                          "--set expects key=value, got '" + kv + "'");
    }
    c.set(subjqa::trim(kv.substr(0, eq)), subjqa::trim(kv.substr(eq + 1)));
  }
  if (!o.seed.empty()) c.set("seed", o.seed);
  if (o.port >= 0) c.set("serve_port", std::to_string(o.port));
  if (!o.phase.empty()) c.set("serve_phase", o.phase);
  c.validate();
  return c;
}

// SIGINT/SIGTERM stop the live server; waited for on a helper thread so the
// handler itself does nothing unsafe.
void stop_on_signal(subjqa::AnnotationServer& server) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread([set, &server]() mutable {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  }).detach();
}

int run(const std::vector<std::string>& stages, const Common& o) {
  const subjqa::PipelineConfig config = make_config(o);
  subjqa::StageOptions opt;
  if (!o.manifest_only) {
    opt.log = [](const std::string& line) { std::cerr << line << "\n"; };
  }
  opt.on_listen = [](subjqa::AnnotationServer& server, int port) {
    stop_on_signal(server);
    std::cerr << "serving on port " << port << "; Ctrl-C to stop\n";
  };
  for (const auto& stage : stages) {
    const auto result = subjqa::run_stage(stage, config, o.out, opt);
    if (o.manifest_only) {
      std::cout << result.manifest_json;
    } else {
      std::cout << stage << ": ok (" << result.outputs.size()
                << " outputs, manifest " << result.manifest_path.string()
                << ")\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SubjQA dataset workbench"};
  app.require_subcommand(1);
  Common o;
  std::vector<std::string> selected;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "key = value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "overrides the config seed");
    sub->add_option("--set", o.sets, "overrides one config key (key=value)");
    sub->add_flag("--manifest-only", o.manifest_only,
                  "print only the stage manifests (JSON)");
  };

  for (const auto& stage : subjqa::pipeline_stages()) {
    auto* sub = app.add_subcommand(stage, "run the " + stage + " stage");
    add_common(sub);
    if (stage == "serve") {
      sub->add_option("--port", o.port, "listen on this port (0 = offline import)");
      sub->add_option("--phase", o.phase, "spans or questions")
          ->check(CLI::IsMember({"spans", "questions"}));
    }
    sub->callback([&selected, stage] { selected = {stage}; });
  }
  auto* all = app.add_subcommand("all", "run every stage in order");
  add_common(all);
  all->callback([&selected] { selected = subjqa::pipeline_stages(); });

  auto* cfg = app.add_subcommand("config", "print the effective configuration");
  add_common(cfg);
  bool want_config = false;
  cfg->callback([&want_config] { want_config = true; });

  CLI11_PARSE(app, argc, argv);
  try {
    if (want_config) {
      const auto c = make_config(o);
      std::cout << c.canonical() << "# hash " << c.hash() << "\n";
      return 0;
    }
    return run(selected, o);
  } catch (const subjqa::Error& e) {
    std::cerr << "error [" << subjqa::to_string(e.kind()) << "]: " << e.what()
              << "\n";
    switch (e.kind()) {
      case subjqa::ErrorKind::kConfig:
      case subjqa::ErrorKind::kParameter: return 2;
      case subjqa::ErrorKind::kMissingStage: return 3;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
