// efr: command-line front end for indexing, mining, training, retrieval
// and evaluation. Every subcommand takes an optional config file and
// key=value overrides; overrides win.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "efr/error.hpp"
#include "efr/pipeline.hpp"

#ifdef EFR_HAS_OPENMP
#include <omp.h>
#endif

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  int threads = 0;
};

using Command = void (*)(const efr::RunConfig&, std::ostream&);

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Common& opts) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("-c,--config", opts.config_file, "key=value config file");
  sub->add_option("-s,--set", opts.overrides, "override, e.g. --set lambda=0.5")->take_all();
  sub->add_option("--threads", opts.threads, "cap on worker threads (0 = runtime default)");
  return sub;
}

efr::RunConfig resolve(const Common& opts) {
  efr::RunConfig c = opts.config_file.empty() ? efr::RunConfig{} : efr::RunConfig::from_file(opts.config_file);
  for (const auto& kv : opts.overrides) c.assign(kv);
  if (opts.threads > 0) c.set("threads", std::to_string(opts.threads));
#ifdef EFR_HAS_OPENMP
  if (const auto t = c.count("threads"); t > 0) omp_set_num_threads(static_cast<int>(t));
#endif
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity-focused passage retrieval"};
  app.require_subcommand(1);
  Common opts;

  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"index", "build the sparse (BM25) and dense passage indexes", efr::cmd_index},
      {"mine", "score entities by SRR gain and build the training set", efr::cmd_mine},
      {"train", "train the encoder and write a checkpoint", efr::cmd_train},
      {"retrieve", "MIPS top-depth retrieval followed by entity-focused rerank", efr::cmd_retrieve},
      {"eval", "MRR@k, P@k and oracle-entity recall for one or more run files", efr::cmd_eval},
      {"sweep-lambda", "retrieve and evaluate over a list of rerank weights", efr::cmd_sweep_lambda},
      {"gen-synth", "write the seeded synthetic dataset and a matching config", efr::cmd_gen_synth},
  };
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, help, fn] : commands) subs.emplace_back(add_command(app, name, help, opts), fn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto config = resolve(opts);
    for (const auto& [sub, fn] : subs) {
      if (sub->parsed()) fn(config, std::cout);
    }
    return 0;
  } catch (const efr::ConfigError& e) {
    std::cerr << "efr: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "efr: " << e.what() << "\n";
    return 1;
  }
}
