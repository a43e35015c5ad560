// Copyright 2026 The ABIG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "abig/experiment.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace abig {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'");
}

Cell parse_cell(const std::string& key, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw ConfigError("key '" + key + "': expected x,y but got '" + text + "'");
  return {parse_number<int>(key, parts[0]), parse_number<int>(key, parts[1])};
}

std::string cell_to_string(Cell c) { return std::to_string(c.x) + "," + std::to_string(c.y); }

std::vector<Cell> parse_cells(const std::string& key, const std::string& text, char sep) {
  std::vector<Cell> cells;
  for (const auto& part : split(text, sep)) cells.push_back(parse_cell(key, part));
  return cells;
}

std::string cells_to_string(const std::vector<Cell>& cells, const std::string& sep) {
  std::vector<std::string> parts;
  for (Cell c : cells) parts.push_back(cell_to_string(c));
  return join(parts, sep);
}

Cell default_place_target(const GridConfig& env) { return {env.width / 2, env.height / 2}; }

// Two-row, three-column rectangle used when a six-block shape is not given.
std::vector<Cell> default_shape(const GridConfig& env) {
  if (env.n_blocks != 6 || env.width < 4 || env.height < 3) {
    throw ConfigError("shapes task needs explicit shape_cells for this grid");
  }
  return {{1, 1}, {2, 1}, {3, 1}, {1, 2}, {2, 2}, {3, 2}};
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << content;
}

// Parsed form of the config keys that only make sense together.
struct TaskKeys {
  std::vector<std::string> names{"grasp"};
  std::optional<Cell> place_target;
  std::optional<std::vector<Cell>> shape_cells;
  std::string transfer = "none";
};

TaskSpec build_task(const std::string& name, const TaskKeys& keys, const GridConfig& env) {
  const TaskKind kind = parse_task_kind(name);
  switch (kind) {
    case TaskKind::kPlace:
      return TaskSpec::place(keys.place_target.value_or(default_place_target(env)));
    case TaskKind::kShapes:
      return TaskSpec::shapes(keys.shape_cells ? *keys.shape_cells : default_shape(env));
    case TaskKind::kGrasp: return TaskSpec::grasp();
    case TaskKind::kHLine: return TaskSpec::hline();
    case TaskKind::kVLine: return TaskSpec::vline();
  }
  throw ConfigError("unknown task");
}

struct Field {
  std::string name;
  std::function<void(ExperimentConfig&, TaskKeys&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string place_target_of(const ExperimentConfig& c) {
  for (const TaskSpec& t : c.abig.tasks) {
    if (t.place_target) return cell_to_string(*t.place_target);
  }
  if (c.transfer_task && c.transfer_task->place_target) {
    return cell_to_string(*c.transfer_task->place_target);
  }
  return cell_to_string(default_place_target(c.abig.env));
}

std::string shape_cells_of(const ExperimentConfig& c) {
  for (const TaskSpec& t : c.abig.tasks) {
    if (t.kind == TaskKind::kShapes) return cells_to_string(t.shape_cells, ";");
  }
  if (c.transfer_task && c.transfer_task->kind == TaskKind::kShapes) {
    return cells_to_string(c.transfer_task->shape_cells, ";");
  }
  return "none";
}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f;
    auto int_field = [&f](std::string name, auto member) {
      f.push_back({name,
                   [name, member](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                     member(c) = parse_number<int>(name, v);
                   },
                   [member](const ExperimentConfig& c) {
                     return std::to_string(member(const_cast<ExperimentConfig&>(c)));
                   }});
    };
    auto double_field = [&f](std::string name, auto member) {
      f.push_back({name,
                   [name, member](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                     member(c) = parse_number<double>(name, v);
                   },
                   [member](const ExperimentConfig& c) {
                     return format_double(member(const_cast<ExperimentConfig&>(c)));
                   }});
    };
    f.push_back({"task",
                 [](ExperimentConfig&, TaskKeys& k, const std::string& v) { k.names = split(v, ','); },
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> names;
                   for (const auto& t : c.abig.tasks) names.emplace_back(task_kind_name(t.kind));
                   return join(names, ",");
                 }});
    f.push_back({"place_target",
                 [](ExperimentConfig&, TaskKeys& k, const std::string& v) {
                   k.place_target = parse_cell("place_target", v);
                 },
                 place_target_of});
    f.push_back({"shape_cells",
                 [](ExperimentConfig&, TaskKeys& k, const std::string& v) {
                   if (v != "none") k.shape_cells = parse_cells("shape_cells", v, ';');
                 },
                 shape_cells_of});
    int_field("width", [](ExperimentConfig& c) -> int& { return c.abig.env.width; });
    int_field("height", [](ExperimentConfig& c) -> int& { return c.abig.env.height; });
    int_field("n_blocks", [](ExperimentConfig& c) -> int& { return c.abig.env.n_blocks; });
    int_field("horizon", [](ExperimentConfig& c) -> int& { return c.abig.env.horizon; });
    int_field("vocab_size", [](ExperimentConfig& c) -> int& { return c.abig.vocab_size; });
    int_field("n_iterations", [](ExperimentConfig& c) -> int& { return c.abig.n_iterations; });
    int_field("n_collect", [](ExperimentConfig& c) -> int& { return c.abig.n_collect; });
    int_field("model_epochs", [](ExperimentConfig& c) -> int& { return c.abig.model_bc.fit.epochs; });
    int_field("builder_epochs",
              [](ExperimentConfig& c) -> int& { return c.abig.builder_bc.fit.epochs; });
    f.push_back({"batch_size",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                   c.abig.model_bc.fit.batch_size = c.abig.builder_bc.fit.batch_size =
                       parse_number<int>("batch_size", v);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.abig.model_bc.fit.batch_size); }});
    f.push_back({"lr",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                   c.abig.model_bc.fit.adam.lr = c.abig.builder_bc.fit.adam.lr =
                       parse_number<double>("lr", v);
                 },
                 [](const ExperimentConfig& c) { return format_double(c.abig.model_bc.fit.adam.lr); }});
    f.push_back({"hidden",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                   std::vector<int> h;
                   for (const auto& p : split(v, ',')) h.push_back(parse_number<int>("hidden", p));
                   if (h.empty()) throw ConfigError("key 'hidden': needs at least one width");
                   c.abig.model_bc.hidden = c.abig.builder_bc.hidden = h;
                 },
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> parts;
                   for (int h : c.abig.model_bc.hidden) parts.push_back(std::to_string(h));
                   return join(parts, ",");
                 }});
    int_field("mcts_simulations", [](ExperimentConfig& c) -> int& { return c.abig.mcts.simulations; });
    int_field("mcts_max_depth", [](ExperimentConfig& c) -> int& { return c.abig.mcts.max_depth; });
    double_field("uct_c", [](ExperimentConfig& c) -> double& { return c.abig.mcts.uct_c; });
    double_field("gamma", [](ExperimentConfig& c) -> double& { return c.abig.mcts.gamma; });
    f.push_back({"planner_builder_mode",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                   c.abig.mcts.builder_mode = parse_act_mode(v);
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(act_mode_name(c.abig.mcts.builder_mode));
                 }});
    f.push_back({"success_filter",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                   c.abig.success_filter = parse_bool("success_filter", v);
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.abig.success_filter ? "true" : "false");
                 }});
    double_field("reward_magnitude",
                 [](ExperimentConfig& c) -> double& { return c.abig.reward_magnitude; });
    f.push_back({"seeds",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                   c.seeds.clear();
                   for (const auto& p : split(v, ',')) {
                     c.seeds.push_back(parse_number<std::uint64_t>("seeds", p));
                   }
                 },
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> parts;
                   for (auto s : c.seeds) parts.push_back(std::to_string(s));
                   return join(parts, ",");
                 }});
    int_field("eval_episodes", [](ExperimentConfig& c) -> int& { return c.eval_episodes; });
    f.push_back({"eval_modes",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                   c.eval_modes.clear();
                   for (const auto& p : split(v, ',')) c.eval_modes.push_back(parse_act_mode(p));
                 },
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> parts;
                   for (auto m : c.eval_modes) parts.emplace_back(act_mode_name(m));
                   return join(parts, ",");
                 }});
    f.push_back({"baselines",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) {
                   c.run_no_intent = c.run_random = false;
                   if (v == "none") return;
                   for (const auto& p : split(v, ',')) {
                     if (p == "no_intent") c.run_no_intent = true;
                     else if (p == "random") c.run_random = true;
                     else throw ConfigError("key 'baselines': unknown baseline '" + p + "'");
                   }
                 },
                 [](const ExperimentConfig& c) {
                   std::vector<std::string> parts;
                   if (c.run_no_intent) parts.emplace_back("no_intent");
                   if (c.run_random) parts.emplace_back("random");
                   return parts.empty() ? std::string("none") : join(parts, ",");
                 }});
    f.push_back({"transfer_task",
                 [](ExperimentConfig&, TaskKeys& k, const std::string& v) { k.transfer = v; },
                 [](const ExperimentConfig& c) {
                   return c.transfer_task ? task_to_string(*c.transfer_task) : std::string("none");
                 }});
    int_field("transfer_episodes", [](ExperimentConfig& c) -> int& { return c.transfer_episodes; });
    int_field("dump_episodes", [](ExperimentConfig& c) -> int& { return c.dump_episodes; });
    int_field("jobs", [](ExperimentConfig& c) -> int& { return c.jobs; });
    f.push_back({"out_dir",
                 [](ExperimentConfig& c, TaskKeys&, const std::string& v) { c.out_dir = v; },
                 [](const ExperimentConfig& c) { return c.out_dir; }});
    return f;
  }();
  return kFields;
}

json summary_json(const EvalReport& r) {
  return {{"task", r.task},
          {"episodes", r.episodes},
          {"success_rate", r.success_rate},
          {"mean_length", r.mean_length},
          {"mode", std::string(act_mode_name(r.mode))},
          {"seed", r.seed}};
}

json episode_json(const EpisodeRecord& rec, const ExperimentConfig& cfg, const std::string& run,
                  std::uint64_t seed, std::string_view variant, std::string_view mode, int index) {
  json steps = json::array();
  for (const StepRecord& s : rec.steps) {
    steps.push_back({{"obs", s.obs},
                     {"msg", s.message},
                     {"action", action_index(s.action)},
                     {"reward", s.reward}});
  }
  return {{"run", run},
          {"seed", seed},
          {"variant", variant},
          {"task", task_to_string(rec.task)},
          {"mode", mode},
          {"episode", index},
          {"width", cfg.abig.env.width},
          {"height", cfg.abig.env.height},
          {"n_blocks", cfg.abig.env.n_blocks},
          {"vocab_size", cfg.abig.vocab_size},
          {"success", rec.success},
          {"steps", std::move(steps)}};
}

struct MetricLine {
  int iteration;
  int frame_order;
  int variant_order;
  json record;
  json timing;
};

struct SeedOutput {
  std::vector<MetricLine> metrics;
  std::vector<SummaryRow> rows;
  std::vector<json> episodes;
};

SeedOutput run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& run_dir,
                    const std::string& run_id) {
  SeedOutput out;
  AbigConfig abig = cfg.abig;
  abig.seed = seed;

  std::vector<std::pair<Variant, RunArtifacts>> trained;
  trained.emplace_back(Variant::kAbig, abig_train(abig));
  if (cfg.run_no_intent) trained.emplace_back(Variant::kNoIntent, train_no_intent(abig));

  for (const auto& [variant, art] : trained) {
    for (const FrameEvent& e : art.frames) {
      const bool modeling = e.kind != FrameKind::kGuiding;
      json rec = {{"run", run_id},
                  {"seed", seed},
                  {"variant", variant_name(variant)},
                  {"iteration", e.iteration},
                  {"frame", frame_kind_name(e.kind)},
                  {"model_loss", modeling ? json(e.bc_loss) : json(nullptr)},
                  {"builder_loss", modeling ? json(nullptr) : json(e.bc_loss)},
                  {"success_rate", e.success_rate ? json(*e.success_rate) : json(nullptr)},
                  {"buffer_size", e.tuples},
                  {"buffer_size_after_flush", e.size_after_flush},
                  {"uniform_tuples", e.uniform_tuples},
                  {"planner_tuples", e.planner_tuples},
                  {"builder_hash", hex(e.builder_hash)},
                  {"model_hash", hex(e.model_hash)}};
      json timing = {{"run", run_id},
                     {"seed", seed},
                     {"variant", variant_name(variant)},
                     {"iteration", e.iteration},
                     {"frame", frame_kind_name(e.kind)},
                     {"wall_ms", e.wall_ms}};
      out.metrics.push_back({e.iteration, static_cast<int>(e.kind), static_cast<int>(variant),
                             std::move(rec), std::move(timing)});
    }
    const fs::path dir = run_dir / ("seed_" + std::to_string(seed)) / std::string(variant_name(variant));
    fs::create_directories(dir);
    nn::save_checkpoint(art.builder.net.params(), "builder", (dir / "builder.json").string());
    nn::save_checkpoint(art.model.net.params(), "builder_model", (dir / "model.json").string());
  }

  std::vector<std::pair<std::string, TaskSpec>> eval_tasks;
  for (const TaskSpec& t : cfg.abig.tasks) eval_tasks.emplace_back(task_to_string(t), t);
  if (cfg.transfer_task) {
    eval_tasks.emplace_back("transfer:" + task_to_string(*cfg.transfer_task), *cfg.transfer_task);
  }

  auto record = [&](std::string_view variant, const std::string& label, const EvalReport& report,
                    std::vector<EpisodeRecord>& episodes) {
    out.rows.push_back({run_id, seed, std::string(variant), label, report.success_rate,
                        report.mean_length, std::string(act_mode_name(report.mode))});
    const int n = std::min<int>(cfg.dump_episodes, static_cast<int>(episodes.size()));
    for (int i = 0; i < n; ++i) {
      out.episodes.push_back(
          episode_json(episodes[i], cfg, run_id, seed, variant, act_mode_name(report.mode), i));
    }
  };

  for (const auto& [label, task] : eval_tasks) {
    const bool transfer = label.rfind("transfer:", 0) == 0;
    const int episodes = transfer ? cfg.transfer_episodes : cfg.eval_episodes;
    for (ActMode mode : cfg.eval_modes) {
      for (const auto& [variant, art] : trained) {
        std::vector<EpisodeRecord> eps;
        PlannerMessages architect(art.model.net, cfg.abig.mcts, cfg.abig.env);
        const EvalReport r =
            evaluate(architect, art.builder.net, cfg.abig.env, task, episodes, mode, seed, &eps);
        record(variant_name(variant), label, r, eps);
      }
      if (cfg.run_random) {
        std::vector<EpisodeRecord> eps;
        UniformMessages architect(cfg.abig.vocab_size);
        const UniformActionModel builder = random_builder_baseline(abig);
        const EvalReport r =
            evaluate(architect, builder, cfg.abig.env, task, episodes, mode, seed, &eps);
        record(variant_name(Variant::kRandom), label, r, eps);
      }
    }
  }
  return out;
}

struct RunCheckpoints {
  ExperimentConfig config;
  std::vector<std::pair<std::uint64_t, std::pair<BuilderPolicy, BuilderModel>>> seeds;
};

RunCheckpoints load_run(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw ArgumentError("no run directory " + run_dir.string());
  const fs::path cfg_path = run_dir / "config.cfg";
  if (!fs::exists(cfg_path)) throw ArgumentError("run " + run_dir.string() + " has no config.cfg");
  RunCheckpoints run{load_config(cfg_path), {}};
  const int obs_dim = observation_dim(run.config.abig.env.n_blocks);
  for (std::uint64_t seed : run.config.seeds) {
    const fs::path dir = run_dir / ("seed_" + std::to_string(seed)) / "abig";
    if (!fs::exists(dir / "builder.json") || !fs::exists(dir / "model.json")) {
      throw ArgumentError("missing checkpoints in " + dir.string());
    }
    BuilderPolicy builder{MessageConditionedNet(nn::load_checkpoint((dir / "builder.json").string()),
                                                obs_dim, run.config.abig.vocab_size)};
    BuilderModel model{MessageConditionedNet(nn::load_checkpoint((dir / "model.json").string()),
                                             obs_dim, run.config.abig.vocab_size)};
    run.seeds.push_back({seed, {std::move(builder), std::move(model)}});
  }
  return run;
}

}  // namespace

void ExperimentConfig::validate() const {
  abig.validate();
  if (seeds.empty()) throw ConfigError("seed list must be nonempty");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (transfer_episodes < 1) throw ConfigError("transfer_episodes must be >= 1");
  if (eval_modes.empty()) throw ConfigError("eval_modes must be nonempty");
  if (dump_episodes < 0) throw ConfigError("dump_episodes must be >= 0");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (transfer_task) transfer_task->validate(abig.env);
  if (out_dir.empty()) throw ConfigError("out_dir must be nonempty");
}

TaskSpec parse_task(const std::string& text, const GridConfig& env) {
  const auto at = text.find('@');
  TaskKeys keys;
  const std::string name = trim(text.substr(0, at));
  if (at != std::string::npos) {
    const std::string params = text.substr(at + 1);
    const TaskKind kind = parse_task_kind(name);
    if (kind == TaskKind::kPlace) keys.place_target = parse_cell("task", params);
    else if (kind == TaskKind::kShapes) keys.shape_cells = parse_cells("task", params, ';');
    else throw ConfigError("task '" + name + "' takes no parameters");
  }
  TaskSpec task = build_task(name, keys, env);
  task.validate(env);
  return task;
}

std::string task_to_string(const TaskSpec& task) {
  std::string s(task_kind_name(task.kind));
  if (task.place_target) s += "@" + cell_to_string(*task.place_target);
  if (task.kind == TaskKind::kShapes) s += "@" + cells_to_string(task.shape_cells, ";");
  return s;
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> raw;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!raw.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  ExperimentConfig cfg;
  TaskKeys keys;
  for (const Field& f : fields()) {
    auto it = raw.find(f.name);
    if (it == raw.end()) continue;
    f.set(cfg, keys, it->second);
    raw.erase(it);
  }
  if (!raw.empty()) throw ConfigError("unknown key '" + raw.begin()->first + "'");

  cfg.abig.tasks.clear();
  for (const auto& name : keys.names) cfg.abig.tasks.push_back(build_task(name, keys, cfg.abig.env));
  if (keys.transfer != "none") cfg.transfer_task = build_task(keys.transfer, keys, cfg.abig.env);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.name + " = " + f.get(config) + "\n";
  return out;
}

TrainOutcome cmd_train(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const fs::path run_dir(config.out_dir);
  fs::create_directories(run_dir);
  const std::string run_id = run_dir.filename().string();
  write_file(run_dir / "config.cfg", serialize_config(config));

  std::vector<SeedOutput> results(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::mutex log_mutex;
  std::size_t next = 0;
  std::mutex next_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(next_mutex);
        if (next >= config.seeds.size()) return;
        i = next++;
      }
      try {
        results[i] = run_seed(config, config.seeds[i], run_dir, run_id);
        std::lock_guard lock(log_mutex);
        log << "seed " << config.seeds[i] << " done\n";
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::min<int>(config.jobs, static_cast<int>(config.seeds.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::string metrics;
  std::string timing;
  std::string episodes;
  TrainOutcome outcome{{}, run_dir};
  for (SeedOutput& r : results) {
    std::stable_sort(r.metrics.begin(), r.metrics.end(), [](const MetricLine& a, const MetricLine& b) {
      return std::tie(a.iteration, a.frame_order, a.variant_order) <
             std::tie(b.iteration, b.frame_order, b.variant_order);
    });
    for (const MetricLine& m : r.metrics) {
      metrics += m.record.dump() + "\n";
      timing += m.timing.dump() + "\n";
    }
    for (const json& e : r.episodes) episodes += e.dump() + "\n";
    outcome.summary.insert(outcome.summary.end(), r.rows.begin(), r.rows.end());
  }
  std::ostringstream csv;
  csv << "run,seed,variant,task,success_rate,mean_len,mode\n";
  for (const SummaryRow& row : outcome.summary) {
    csv << row.run << ',' << row.seed << ',' << row.variant << ',' << row.task << ','
        << format_double(row.success_rate) << ',' << format_double(row.mean_len) << ','
        << row.mode << '\n';
  }
  write_file(run_dir / "metrics.jsonl", metrics);
  write_file(run_dir / "timing.jsonl", timing);
  write_file(run_dir / "episodes.jsonl", episodes);
  write_file(run_dir / "summary.csv", csv.str());
  log << "wrote " << (run_dir / "summary.csv").string() << "\n";
  return outcome;
}

std::vector<EvalReport> cmd_eval(const fs::path& run_dir, const std::string& task, int episodes,
                                 std::ostream& out) {
  const RunCheckpoints run = load_run(run_dir);
  const TaskSpec spec = parse_task(task, run.config.abig.env);
  std::vector<EvalReport> reports;
  for (const auto& [seed, agents] : run.seeds) {
    for (ActMode mode : run.config.eval_modes) {
      PlannerMessages architect(agents.second.net, run.config.abig.mcts, run.config.abig.env);
      reports.push_back(
          evaluate(architect, agents.first.net, run.config.abig.env, spec, episodes, mode, seed));
      out << summary_json(reports.back()).dump() << "\n";
    }
  }
  return reports;
}

std::vector<TransferReport> cmd_transfer(const fs::path& run_dir, const std::string& target,
                                         int episodes, std::ostream& out) {
  const RunCheckpoints run = load_run(run_dir);
  const TaskSpec spec = parse_task(target, run.config.abig.env);
  std::vector<TransferReport> reports;
  for (const auto& [seed, agents] : run.seeds) {
    for (ActMode mode : run.config.eval_modes) {
      TransferReport r;
      r.seed = seed;
      r.transferred = transfer_eval(agents.first, agents.second, run.config.abig.env, spec,
                                    run.config.abig.mcts, episodes, mode, seed);
      UniformMessages uniform(run.config.abig.vocab_size);
      const UniformActionModel random_builder(run.config.abig.vocab_size);
      r.random_baseline =
          evaluate(uniform, random_builder, run.config.abig.env, spec, episodes, mode, seed);
      out << json{{"seed", seed},
                  {"transfer", summary_json(r.transferred)},
                  {"random", summary_json(r.random_baseline)}}
                 .dump()
          << "\n";
      reports.push_back(r);
    }
  }
  return reports;
}

OracleReport cmd_oracle(const std::string& instance, std::ostream& out) {
  std::map<std::string, std::string> kv;
  for (const auto& part : split(instance, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("instance part '" + part + "' is not key=value");
    kv[trim(part.substr(0, eq))] = trim(part.substr(eq + 1));
  }
  auto take = [&](const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    std::string v = it == kv.end() ? fallback : it->second;
    if (it != kv.end()) kv.erase(it);
    return v;
  };
  const std::string size = take("size", "3x3");
  const auto x = size.find('x');
  if (x == std::string::npos) throw ConfigError("size must look like WxH");
  GridConfig env;
  env.width = parse_number<int>("size", size.substr(0, x));
  env.height = parse_number<int>("size", size.substr(x + 1));
  EnvState state;
  state.agent = parse_cell("agent", take("agent", "0,0"));
  const std::string blocks = take("blocks", "");
  if (!blocks.empty() && blocks != "none") {
    for (Cell c : parse_cells("blocks", blocks, '|')) state.blocks.push_back({c, false});
  }
  env.n_blocks = static_cast<int>(state.blocks.size());
  const std::string task_text = take("task", "grasp");
  const double gamma = parse_number<double>("gamma", take("gamma", "0.95"));
  if (!kv.empty()) throw ConfigError("unknown instance key '" + kv.begin()->first + "'");
  env.validate();
  if (const auto bad = invariant_violations(state, env); !bad.empty()) {
    throw ConfigError("invalid instance: " + bad.front());
  }
  const TaskSpec task = parse_task(task_text, env);

  OracleReport report;
  report.bfs_length = bfs_oracle(state, task, env);
  const EnumeratedWorld world = enumerate_world(env, task);
  const std::vector<double> values = value_iteration(world.mdp, gamma, 1e-12);
  report.n_states = world.mdp.n_states;
  report.optimal_value = values[world.id_of(state)];
  report.greedy_length = greedy_episode_length(world, values, gamma, state, world.mdp.n_states);

  out << render_ascii(state, env) << "\n";
  out << json{{"task", task_to_string(task)},
              {"states", report.n_states},
              {"bfs_length", report.bfs_length ? json(*report.bfs_length) : json(nullptr)},
              {"optimal_value", report.optimal_value},
              {"greedy_length", report.greedy_length ? json(*report.greedy_length) : json(nullptr)}}
             .dump()
      << "\n";
  return report;
}

InspectReport cmd_inspect(const fs::path& run_dir, std::ostream& out, int replay_episodes) {
  const fs::path path = run_dir / "episodes.jsonl";
  if (!fs::exists(path)) throw ArgumentError("no episodes.jsonl in " + run_dir.string());
  std::istringstream in(read_file(path));
  std::vector<InteractionTuple> tuples;
  std::vector<json> episodes;
  int vocab = 0;
  for (std::string line; std::getline(in, line);) {
    if (trim(line).empty()) continue;
    json ep = json::parse(line);
    vocab = std::max(vocab, ep.at("vocab_size").get<int>());
    episodes.push_back(std::move(ep));
  }
  // The protocol is read off the guided ABIG episodes when the log has any;
  // baseline episodes would only dilute it.
  const bool has_abig = std::any_of(episodes.begin(), episodes.end(), [](const json& ep) {
    return ep.value("variant", "") == variant_name(Variant::kAbig);
  });
  for (const json& ep : episodes) {
    if (has_abig && ep.value("variant", "") != variant_name(Variant::kAbig)) continue;
    for (const json& s : ep.at("steps")) {
      tuples.push_back({s.at("obs").get<Observation>(), s.at("msg").get<int>(),
                        action_from_index(s.at("action").get<int>()), Provenance::kPlanner});
    }
  }
  InspectReport report{protocol_stats(tuples, vocab), episodes.size()};
  const ProtocolStats& st = report.stats;
  out << json{{"episodes", report.episodes},
              {"tuples", tuples.size()},
              {"vocab_size", st.vocab_size},
              {"support", st.support},
              {"mutual_information_bits", st.mutual_information_bits},
              {"conditional_entropy_bits", st.conditional_entropy_bits},
              {"message_entropy_bits", st.message_entropy_bits},
              {"action_entropy_bits", st.action_entropy_bits}}
             .dump()
      << "\n";
  out << "P(a|m)      up   down   left  right toggle   noop\n";
  for (int m = 0; m < st.vocab_size; ++m) {
    if (!st.conditional[m]) continue;
    out << "m=" << std::setw(2) << m << "   ";
    for (double p : *st.conditional[m]) out << std::fixed << std::setprecision(3) << std::setw(7) << p;
    out << "\n";
  }
  out.unsetf(std::ios::floatfield);
  for (int e = 0; e < std::min<int>(replay_episodes, static_cast<int>(episodes.size())); ++e) {
    const json& ep = episodes[e];
    GridConfig env;
    env.width = ep.at("width").get<int>();
    env.height = ep.at("height").get<int>();
    env.n_blocks = ep.at("n_blocks").get<int>();
    out << "episode " << e << " (" << ep.value("variant", "?") << ", "
        << ep.at("task").get<std::string>() << ")\n";
    int t = 0;
    for (const json& s : ep.at("steps")) {
      const EnvState state = state_from_observation(s.at("obs").get<Observation>(), env, t);
      out << "t=" << t << " msg=" << s.at("msg").get<int>()
          << " action=" << action_name(action_from_index(s.at("action").get<int>()))
          << " reward=" << s.at("reward").get<double>() << "\n"
          << render_ascii(state, env) << "\n";
      ++t;
    }
  }
  return report;
}

}  // namespace abig
