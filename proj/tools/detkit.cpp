// detkit command-line front end: deterministic initialization, batch
// orderings, canonical hashing/verification, the toy training loop, the
// multi-seed variance experiment, and the numerical theory suite.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "detkit/detkit.hpp"

namespace {

using detkit::spec_error;

// ---------------------------------------------------------------------------
// Line-oriented key=value config files ('#' starts a comment).

std::map<std::string, std::string> load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw detkit::io_error("cannot open config: " + path);
  std::map<std::string, std::string> cfg;
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw spec_error("config: empty key in line: " + line);
    if (!cfg.emplace(key, trim(line.substr(eq + 1))).second)
      throw spec_error("config: duplicate key: " + key);
  }
  return cfg;
}

std::string cfg_get(const std::map<std::string, std::string>& cfg,
                    const std::string& key, const std::string& fallback) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

detkit::InitPlan parse_plan(const std::string& name) {
  if (name == "mixed") return detkit::InitPlan{};
  return detkit::InitPlan::uniform(detkit::basis_from_name(name));
}

detkit::OrderingStrategy parse_strategy(const std::string& s) {
  if (s == "golden") return detkit::OrderingStrategy::golden;
  if (s == "seeded") return detkit::OrderingStrategy::seeded;
  if (s == "sobol") return detkit::OrderingStrategy::sobol;
  if (s == "class-guaranteed") return detkit::OrderingStrategy::class_guaranteed;
  if (s == "content-hash") return detkit::OrderingStrategy::content_hash;
  throw spec_error("unknown ordering strategy: " + s);
}

// ---------------------------------------------------------------------------
// Shared train/experiment config plumbing.

struct RunSetup {
  detkit::ToyModelConfig model;
  detkit::TrainConfig train;
  std::vector<double> prevalences;
  std::size_t n_train = 256, n_val = 96, n_test = 96;
  std::uint64_t data_seed = 1;
  std::string out_dir;
};

RunSetup load_run_setup(const std::string& path) {
  const auto cfg = load_config(path);
  static const std::set<std::string> kKnownKeys{
      "input_len",     "channels",      "stem_width", "residual_blocks",
      "num_classes",   "feature_dim",   "pool_len",   "epochs",
      "batch_size",    "lr",            "ordering",   "ordering_seed",
      "init",          "plan",          "init_seed",  "class_weighting",
      "eval_every",    "buffer_l2",     "logit_clamp", "prevalences",
      "n_train",       "n_val",         "n_test",     "data_seed",
      "out_dir"};
  for (const auto& [key, value] : cfg)
    if (!kKnownKeys.count(key))
      throw spec_error("config: unknown key: " + key);
  RunSetup s;
  s.model.input_len = std::stoul(cfg_get(cfg, "input_len", "128"));
  s.model.channels = std::stoul(cfg_get(cfg, "channels", "1"));
  s.model.stem_width = std::stoul(cfg_get(cfg, "stem_width", "16"));
  s.model.residual_blocks = std::stoul(cfg_get(cfg, "residual_blocks", "2"));
  s.model.num_classes = std::stoul(cfg_get(cfg, "num_classes", "6"));
  s.model.feature_dim = std::stoul(
      cfg_get(cfg, "feature_dim", std::to_string(s.model.num_classes + 2)));
  s.model.pool_len = std::stoul(cfg_get(cfg, "pool_len", "8"));

  s.train.epochs = std::stoul(cfg_get(cfg, "epochs", "30"));
  s.train.batch_size = std::stoul(cfg_get(cfg, "batch_size", "32"));
  s.train.lr = std::stod(cfg_get(cfg, "lr", "1e-3"));
  s.train.ordering = parse_strategy(cfg_get(cfg, "ordering", "golden"));
  s.train.ordering_seed = std::stoull(cfg_get(cfg, "ordering_seed", "0"));
  const std::string init = cfg_get(cfg, "init", "structured");
  if (init == "structured") s.train.init = detkit::InitChoice::structured;
  else if (init == "kaiming") s.train.init = detkit::InitChoice::kaiming;
  else throw spec_error("config: init must be structured or kaiming");
  s.train.plan = parse_plan(cfg_get(cfg, "plan", "mixed"));
  s.train.init_seed = std::stoull(cfg_get(cfg, "init_seed", "0"));
  const std::string cw = cfg_get(cfg, "class_weighting", "none");
  if (cw == "none") s.train.class_weighting = detkit::ClassWeighting::none;
  else if (cw == "sqrt")
    s.train.class_weighting = detkit::ClassWeighting::sqrt_weighting;
  else throw spec_error("config: class_weighting must be none or sqrt");
  s.train.eval_every = std::stoul(cfg_get(cfg, "eval_every", "5"));
  s.train.buffer_l2 = std::stof(cfg_get(cfg, "buffer_l2", "0.01"));
  s.train.logit_clamp = std::stof(cfg_get(cfg, "logit_clamp", "50"));

  s.prevalences = parse_double_list(
      cfg_get(cfg, "prevalences", "0.5,0.4,0.3,0.25,0.2,0.15"));
  if (s.prevalences.size() != s.model.num_classes)
    throw spec_error("config: prevalences count must equal num_classes");
  s.n_train = std::stoul(cfg_get(cfg, "n_train", "256"));
  s.n_val = std::stoul(cfg_get(cfg, "n_val", "96"));
  s.n_test = std::stoul(cfg_get(cfg, "n_test", "96"));
  s.data_seed = std::stoull(cfg_get(cfg, "data_seed", "1"));
  s.out_dir = cfg_get(cfg, "out_dir", "");
  return s;
}

// ---------------------------------------------------------------------------
// Subcommand bodies (throw on failure; main maps exceptions to exit 1).

void cmd_gen_init(const std::string& model_path, const std::string& plan_name,
                  const std::string& out_dir) {
  const detkit::ModelSpec model = detkit::load_model_spec(model_path);
  const detkit::ParameterSet params =
      detkit::init_model(model, parse_plan(plan_name));
  detkit::save_parameter_set(params, out_dir);
  std::cout << "digest " << detkit::digest(params).hex << "\n";
}

void cmd_etf(std::size_t classes, std::size_t dim, const std::string& out_dir) {
  const detkit::Tensor<double> etf = detkit::etf_head(classes, dim);
  std::filesystem::create_directories(out_dir);
  detkit::export_array(etf, out_dir + "/etf.npy");

  // Gram check report: row norms and pairwise cosines vs -1/(K-1).
  const double target = -1.0 / (static_cast<double>(classes) - 1.0);
  double worst_norm = 0.0, worst_cos = 0.0;
  for (std::size_t i = 0; i < classes; ++i) {
    double ni = 0.0;
    for (std::size_t d = 0; d < dim; ++d) ni += etf.at(i, d) * etf.at(i, d);
    worst_norm = std::max(worst_norm, std::fabs(std::sqrt(ni) - 1.0));
    for (std::size_t j = i + 1; j < classes; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += etf.at(i, d) * etf.at(j, d);
      worst_cos = std::max(worst_cos, std::fabs(dot - target));
    }
  }
  std::ofstream rep(out_dir + "/gram_check.txt");
  rep.precision(17);
  rep << "classes " << classes << "\ndim " << dim << "\ntarget_cosine "
      << target << "\nmax_row_norm_error " << worst_norm
      << "\nmax_cosine_error " << worst_cos << "\n";
  std::cout << "max_row_norm_error " << worst_norm << "\nmax_cosine_error "
            << worst_cos << "\n";
}

/// Data file: one sample per line. For content-hash the raw line is the
/// sample; otherwise the first field is the sample's f32 L1 norm and any
/// remaining integer fields are class labels.
void cmd_order(const std::string& strategy_name, std::size_t epoch,
               std::uint64_t seed, const std::string& data_path,
               std::size_t batch_size, std::size_t min_per_class) {
  std::ifstream f(data_path);
  if (!f) throw detkit::io_error("cannot open data file: " + data_path);
  std::vector<std::string> raw;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) raw.push_back(line);
  if (raw.empty()) throw spec_error("order: empty data file");

  const detkit::OrderingStrategy strategy = parse_strategy(strategy_name);
  if (strategy == detkit::OrderingStrategy::content_hash) {
    const auto sched = detkit::content_hash_permutation(raw, epoch);
    for (std::size_t i : sched.perm) std::cout << i << "\n";
    return;
  }

  detkit::SampleKeyTable table;
  std::vector<std::vector<std::size_t>> labels;
  bool any_labels = false;
  for (const auto& l : raw) {
    std::istringstream ss(l);
    float key;
    if (!(ss >> key)) throw spec_error("order: bad data line: " + l);
    table.l1_norms.push_back(key);
    std::vector<std::size_t> ls;
    std::size_t c;
    while (ss >> c) ls.push_back(c);
    any_labels = any_labels || !ls.empty();
    labels.push_back(std::move(ls));
  }
  if (any_labels) table.labels = std::move(labels);

  switch (strategy) {
    case detkit::OrderingStrategy::golden:
      for (std::size_t i : detkit::golden_permutation(table, epoch).perm)
        std::cout << i << "\n";
      break;
    case detkit::OrderingStrategy::seeded:
      for (std::size_t i :
           detkit::seeded_permutation(table.n(), seed, epoch).perm)
        std::cout << i << "\n";
      break;
    case detkit::OrderingStrategy::sobol:
      for (std::size_t i : detkit::sobol_permutation(table.n(), epoch).perm)
        std::cout << i << "\n";
      break;
    case detkit::OrderingStrategy::class_guaranteed: {
      const auto batches = detkit::class_guaranteed_batches(
          table, batch_size, min_per_class, epoch);
      for (const auto& b : batches) {
        for (std::size_t j = 0; j < b.size(); ++j)
          std::cout << (j ? " " : "") << b[j];
        std::cout << "\n";
      }
      break;
    }
    default:
      throw spec_error("unreachable ordering strategy");
  }
}

int cmd_verify(const std::string& dir_a, const std::string& dir_b) {
  const detkit::ParameterSet a = detkit::load_parameter_set(dir_a);
  const detkit::ParameterSet b = detkit::load_parameter_set(dir_b);
  const detkit::VerificationReport rep = detkit::compare_runs(a, b);
  std::cout << "digest_a " << rep.a.hex << "\ndigest_b " << rep.b.hex
            << "\nidentical " << (rep.identical ? "yes" : "no") << "\n";
  if (!rep.identical && rep.first_divergent_param)
    std::cout << "first_divergent_param " << *rep.first_divergent_param << "\n";
  return rep.identical ? 0 : 1;
}

void cmd_train(const std::string& config_path) {
  const RunSetup s = load_run_setup(config_path);
  const detkit::SyntheticTask task =
      detkit::synthetic_task(s.prevalences, s.n_train, s.n_val, s.n_test,
                             s.model.input_len, s.model.channels, s.data_seed);
  const detkit::RunResult r = detkit::train(s.model, s.train, task);

  std::cout.precision(10);
  std::cout << "digest " << r.result_digest.hex << "\nbest_val_auc "
            << r.best_val_auc << "\ntest_macro_auc " << r.test_macro_auc
            << "\n";

  if (s.out_dir.empty()) return;
  detkit::save_parameter_set(r.final_params, s.out_dir);
  std::ofstream hist(s.out_dir + "/history.csv");
  hist.precision(17);
  hist << "epoch,val_macro_auc\n";
  for (const auto& [epoch, auc] : r.history) hist << epoch << ',' << auc << '\n';
  std::ofstream res(s.out_dir + "/result.txt");
  res.precision(17);
  res << "digest " << r.result_digest.hex << "\nbest_val_auc " << r.best_val_auc
      << "\ntest_macro_auc " << r.test_macro_auc << "\n";
  for (std::size_t c = 0; c < r.per_class_auc.size(); ++c)
    res << "class_" << c << "_auc " << r.per_class_auc[c] << "\n";
}

void cmd_experiment(const std::string& config_path,
                    const std::vector<std::uint64_t>& seeds,
                    const std::string& out_path) {
  const RunSetup s = load_run_setup(config_path);
  const detkit::SyntheticTask task =
      detkit::synthetic_task(s.prevalences, s.n_train, s.n_val, s.n_test,
                             s.model.input_len, s.model.channels, s.data_seed);
  const detkit::VarianceReport rep =
      detkit::multi_seed_experiment(s.model, s.train, task, seeds);

  std::ostringstream csv;
  csv.precision(17);
  csv << "arm,seed,test_macro_auc\n";
  for (std::size_t i = 0; i < seeds.size(); ++i)
    csv << rep.structured.name << ',' << seeds[i] << ','
        << rep.structured.aucs[i] << '\n';
  for (std::size_t i = 0; i < seeds.size(); ++i)
    csv << rep.kaiming.name << ',' << seeds[i] << ',' << rep.kaiming.aucs[i]
        << '\n';
  csv << "summary,arm,mean,std,min,max\n";
  for (const detkit::ArmReport* arm : {&rep.structured, &rep.kaiming})
    csv << "summary," << arm->name << ',' << arm->mean << ',' << arm->stddev
        << ',' << arm->min << ',' << arm->max << '\n';
  csv << "welch,t,dof,p\n";
  csv << "welch," << rep.welch.t << ',' << rep.welch.dof << ',' << rep.welch.p
      << '\n';

  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(out_path);
    f << csv.str();
    std::cout << "wrote " << out_path << "\n";
  }
}

int cmd_theory(const std::string& only_check) {
  const std::vector<detkit::TheoryReport> all = detkit::theory_suite();
  std::vector<detkit::TheoryReport> selected;
  for (const auto& r : all)
    if (only_check.empty() || r.check_name == only_check) selected.push_back(r);
  if (selected.empty()) throw spec_error("unknown theory check: " + only_check);
  std::cout << detkit::theory_text(selected);
  for (const auto& r : selected)
    if (!r.pass) return 1;
  return 0;
}

void cmd_export(const std::string& basis_name, std::size_t rows,
                std::size_t cols, bool normalized, const std::string& out) {
  const detkit::BasisMatrix b = detkit::basis_matrix(
      detkit::basis_from_name(basis_name), rows, cols, normalized);
  detkit::export_array(b.rows, out);
  std::cout << "wrote " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic-initialization toolkit"};
  app.require_subcommand(1);

  std::string model_path, plan_name = "mixed", out_dir;
  auto* gen = app.add_subcommand("gen-init", "write per-parameter NPY + digest");
  gen->add_option("--model", model_path, "model layer file")->required();
  gen->add_option("--plan", plan_name, "mixed|dct|dst|hadamard|hartley");
  gen->add_option("--out", out_dir, "output directory")->required();

  std::size_t classes = 0, dim = 0;
  std::string etf_out;
  auto* etf = app.add_subcommand("etf", "write ETF matrix + Gram-check report");
  etf->add_option("--classes", classes, "number of classes K")->required();
  etf->add_option("--dim", dim, "feature dimension D")->required();
  etf->add_option("--out", etf_out, "output directory")->required();

  std::string strategy, data_path;
  std::size_t epoch = 0, batch_size = 32, min_per_class = 1;
  std::uint64_t seed = 0;
  auto* order = app.add_subcommand("order", "emit a batch permutation");
  order->add_option("--strategy", strategy,
                    "golden|seeded|sobol|class-guaranteed|content-hash")
      ->required();
  order->add_option("--epoch", epoch, "epoch index");
  order->add_option("--seed", seed, "seed (seeded strategy)");
  order->add_option("--data", data_path, "sample data file")->required();
  order->add_option("--batch-size", batch_size, "class-guaranteed batch size");
  order->add_option("--min-per-class", min_per_class,
                    "class-guaranteed per-class minimum");

  std::string dir_a, dir_b;
  auto* verify = app.add_subcommand("verify", "compare two checkpoint dirs");
  verify->add_option("--a", dir_a, "first directory")->required();
  verify->add_option("--b", dir_b, "second directory")->required();

  std::string train_config;
  auto* train = app.add_subcommand("train", "full deterministic training run");
  train->add_option("--config", train_config, "key=value config file")
      ->required();

  std::string exp_config, exp_out;
  std::vector<std::uint64_t> exp_seeds;
  auto* experiment =
      app.add_subcommand("experiment", "multi-seed variance report");
  experiment->add_option("--config", exp_config, "key=value config file")
      ->required();
  experiment->add_option("--seeds", exp_seeds, "seed list")->required();
  experiment->add_option("--out", exp_out, "CSV output path");

  std::string theory_check;
  auto* theory = app.add_subcommand("theory", "run the numerical suite");
  theory->add_option("--check", theory_check, "run a single named check");

  std::string basis_name, export_out;
  std::size_t rows = 0, cols = 0;
  bool normalized = false;
  auto* exp_cmd = app.add_subcommand("export", "write a basis matrix as NPY");
  exp_cmd->add_option("--basis", basis_name, "dct|dst|hadamard|hartley")
      ->required();
  exp_cmd->add_option("--rows", rows, "row count")->required();
  exp_cmd->add_option("--cols", cols, "column count")->required();
  exp_cmd->add_flag("--normalized", normalized, "orthonormal scaling");
  exp_cmd->add_option("--out", export_out, "output NPY path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) cmd_gen_init(model_path, plan_name, out_dir);
    else if (etf->parsed()) cmd_etf(classes, dim, etf_out);
    else if (order->parsed())
      cmd_order(strategy, epoch, seed, data_path, batch_size, min_per_class);
    else if (verify->parsed()) return cmd_verify(dir_a, dir_b);
    else if (train->parsed()) cmd_train(train_config);
    else if (experiment->parsed()) cmd_experiment(exp_config, exp_seeds, exp_out);
    else if (theory->parsed()) return cmd_theory(theory_check);
    else if (exp_cmd->parsed())
      cmd_export(basis_name, rows, cols, normalized, export_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
