#include "attf/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "attf/guidance.hpp"
#include "attf/pgtm.hpp"
#include "attf/planner.hpp"

namespace attf {

namespace {

const char* termination_name(TerminationMode mode) {
  return mode == TerminationMode::DrainTasks ? "drain" : "fixed";
}

const char* assignment_name(AssignmentMode mode) {
  return mode == AssignmentMode::PriorityGuided ? "pgtm" : "random";
}

class Simulation {
 public:
  Simulation(const Instance& instance, const RunConfig& config, const RunHooks& hooks, bool baseline)
      : map_(instance.map),
        config_(config),
        hooks_(hooks),
        baseline_(baseline),
        tasks_(instance.tasks.tasks),
        token_(map_, instance.starts, config.strict),
        delay_rng_(config.seed),
        recovery_rng_(derive_seed(config.seed, 0x5eed)),
        task_rng_(derive_seed(config.seed, 0x7a5c)),
        provider_(make_guidance_provider(config.guidance)),
        max_iters_(config.max_iters > 0 ? config.max_iters : default_max_iters(map_)) {
    for (auto& t : tasks_) t.phase = TaskPhase::Unreleased;
    for (int e : map_.task_endpoints()) task_cells_.push_back(e);
    if (config.termination == TerminationMode::FixedHorizon) {
      horizon_ = config.horizon;
    } else {
      horizon_ = config.horizon > 0 ? config.horizon : default_horizon(map_, token_.agent_count());
    }
  }

  SimulationResult execute() {
    using clock = std::chrono::steady_clock;
    const auto started = clock::now();
    std::size_t next_release = 0;

    while (true) {
      const int now = token_.now();
      for (const auto& ev : token_.update_completed(tasks_)) {
        if (ev.completed) {
          ++metrics_.completed;
          log("t=" + std::to_string(now) + " agent " + std::to_string(ev.agent) + " completed task " +
              std::to_string(tasks_[ev.task].id));
        }
      }
      if (!baseline_ && config_.termination == TerminationMode::DrainTasks &&
          metrics_.completed == static_cast<int>(tasks_.size()))
        break;
      if (now >= horizon_) {
        metrics_.incomplete = config_.termination == TerminationMode::DrainTasks;
        break;
      }
      // baseline tasks are created already released
      while (!baseline_ && next_release < tasks_.size() && tasks_[next_release].release <= now)
        tasks_[next_release++].phase = TaskPhase::Unassigned;

      if (baseline_) {
        step_baseline();
      } else {
        step_pgtm();
      }

      if (!token_.covers_next_step()) {
        if (config_.strict) throw SafetyViolation("an agent has no reservation for t=" + std::to_string(now + 1));
      }
      if (hooks_.trace) token_.write_trace(*hooks_.trace, tasks_);
      const auto adv = token_.advance(delay_rng_, config_.delay_p);
      metrics_.delays += static_cast<std::int64_t>(adv.delayed.size());
      metrics_.truncations += static_cast<std::int64_t>(adv.truncated.size());
      if (hooks_.after_step) hooks_.after_step(token_, tasks_);
    }

    const auto elapsed_ms = std::chrono::duration<double, std::milli>(clock::now() - started).count();
    return finish(elapsed_ms);
  }

 private:
  void log(std::string line) {
    if (hooks_.log_events) events_.push_back(std::move(line));
  }

  std::vector<AgentId> delayed_set() {
    std::vector<AgentId> d;
    const int now = token_.now();
    for (const auto& s : token_.agents()) {
      if (s.assigned_task == kNone) {
        if (s.delayed || s.needs_replan) token_.clear_flags(s.id);
        continue;
      }
      if (s.delayed || s.needs_replan || s.path_end_t() <= now) d.push_back(s.id);
    }
    return d;
  }

  std::vector<std::uint8_t> environment() const {
    std::vector<std::uint8_t> env(static_cast<std::size_t>(map_.size()), 0);
    for (int i = 0; i < map_.size(); ++i) env[i] = map_.passable(i) ? 0 : 1;
    for (const auto& s : token_.agents())
      if (s.assigned_task == kNone) env[map_.index(s.location)] = 1;
    return env;
  }

  // Guidance for every queued agent-task pair, fetched as one batch.
  std::vector<GuidancePair> fetch_guidance(const AssignmentQueue& queue) {
    if (config_.guidance.mode == GuidanceMode::Zero) return {};
    provider_->begin_timestep();
    std::vector<GuidanceRequest> batch;
    const auto env = environment();
    for (const auto& e : queue) {
      if (!e.task) continue;
      const auto& task = tasks_[*e.task];
      const Cell loc = token_.agent(e.agent).location;
      GuidanceRequest r;
      r.environment = env;
      r.agent = map_.index(loc);
      r.pickup = map_.index(task.phase == TaskPhase::PickedUp ? loc : task.pickup);
      r.delivery = map_.index(task.delivery);
      batch.push_back(std::move(r));
    }
    if (batch.empty()) return {};
    return provider_->fetch(map_, batch);
  }

  IdleContext idle_context(const AssignmentQueue& queue) const {
    IdleContext ctx;
    ctx.max_iters = max_iters_;
    ctx.recovery_radius = config_.recovery_radius;
    std::unordered_set<TaskId> queued;
    for (const auto& e : queue)
      if (e.task) queued.insert(*e.task);
    for (std::size_t k = 0; k < tasks_.size(); ++k) {
      if (tasks_[k].phase != TaskPhase::Unassigned || queued.count(static_cast<TaskId>(k))) continue;
      ctx.open_endpoints.insert(map_.index(tasks_[k].pickup));
      ctx.open_endpoints.insert(map_.index(tasks_[k].delivery));
    }
    return ctx;
  }

  void idle(AgentId a, const IdleContext& ctx) {
    token_.clear_flags(a);
    const auto r = handle_idle(a, token_, ctx, recovery_rng_);
    metrics_.expanded += r.stats.expanded;
    if (r.action == IdleAction::Recovery) ++metrics_.recoveries;
    if (r.action == IdleAction::Yield) ++metrics_.yields;
    if (r.action == IdleAction::Wait) ++metrics_.forced_waits;
    if (r.action == IdleAction::Recovery || r.action == IdleAction::Yield || r.action == IdleAction::Wait)
      log("t=" + std::to_string(token_.now()) + " agent " + std::to_string(a) + " " + to_string(r.action));
  }

  // Returns false when planning failed.
  bool execute_entry(const QueueEntry& e, const GuidancePair& guidance) {
    auto& task = tasks_[*e.task];
    const AgentId a = e.agent;
    const int now = token_.now();
    if (!e.delayed) {
      task.phase = TaskPhase::Assigned;
      task.agent = a;
      task.assigned_at = now;
      token_.set_task(a, *e.task);
    }
    const bool marked_pickup = task.phase == TaskPhase::Assigned && token_.agent(a).location == task.pickup;
    if (marked_pickup) {
      task.phase = TaskPhase::PickedUp;
      task.picked_up_at = now;
    }
    auto r = plan_task(a, task, token_, guidance, max_iters_);
    metrics_.expanded += r.stats.expanded;
    if (!r.committed && e.delayed) {
      // Agents planned through this agent's cell can lock it out of its own task; cut them back once.
      const auto intruders = token_.agents_through(map_.index(token_.agent(a).location), now, a);
      if (!intruders.empty()) {
        for (AgentId j : intruders) token_.truncate_before(j, now + 1);
        r = plan_task(a, task, token_, guidance, max_iters_);
        metrics_.expanded += r.stats.expanded;
        log("t=" + std::to_string(now) + " agent " + std::to_string(a) + " cut back " +
            std::to_string(intruders.size()) + " agents");
      }
    }
    if (r.committed) {
      token_.clear_flags(a);
      return true;
    }
    ++metrics_.plan_failures;
    log("t=" + std::to_string(now) + " agent " + std::to_string(a) + " could not plan task " + std::to_string(task.id));
    if (e.delayed) {
      // keeps its task; waits and retries next timestep
      token_.force_wait(a);
      token_.mark_needs_replan(a);
      ++metrics_.forced_waits;
      return false;
    }
    if (marked_pickup) {
      task.phase = TaskPhase::Assigned;
      task.picked_up_at = -1;
    }
    task.phase = TaskPhase::Unassigned;
    task.agent = kNone;
    task.assigned_at = -1;
    token_.set_task(a, kNone);
    return false;
  }

  void step_pgtm() {
    const int now = token_.now();
    std::vector<DelayedEntry> delayed;
    for (AgentId a : delayed_set()) delayed.push_back({a, token_.agent(a).assigned_task});
    std::unordered_set<AgentId> in_d;
    for (const auto& d : delayed) in_d.insert(d.agent);

    std::vector<IdleEntry> idle_agents;
    for (const auto& s : token_.agents())
      if (s.assigned_task == kNone && !in_d.count(s.id)) idle_agents.push_back({s.id, s.location});

    std::vector<OpenTask> open;
    for (std::size_t k = 0; k < tasks_.size(); ++k)
      if (tasks_[k].phase == TaskPhase::Unassigned && tasks_[k].release < now)
        open.push_back({static_cast<TaskId>(k), tasks_[k].pickup});

    const auto queue = assign(delayed, idle_agents, open);
    const auto fetched = fetch_guidance(queue);
    auto ctx = idle_context(queue);

    std::size_t pos = 0;
    for (const auto& e : queue) {
      if (!e.task) {
        idle(e.agent, ctx);
        continue;
      }
      const GuidancePair g = fetched.empty() ? zero_pair() : fetched[pos];
      ++pos;
      const TaskId k = *e.task;
      if (!execute_entry(e, g) && !e.delayed) {
        ctx.open_endpoints.insert(map_.index(tasks_[k].pickup));
        ctx.open_endpoints.insert(map_.index(tasks_[k].delivery));
        idle(e.agent, ctx);
      }
    }
  }

  void step_baseline() {
    const int now = token_.now();
    AssignmentQueue queue;
    std::unordered_set<AgentId> in_d;
    for (AgentId a : delayed_set()) {
      queue.push_back({a, token_.agent(a).assigned_task, true});
      in_d.insert(a);
    }
    std::uniform_int_distribution<std::size_t> pick(0, task_cells_.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_other(0, task_cells_.size() - 2);
    for (const auto& s : token_.agents()) {
      if (s.assigned_task != kNone || in_d.count(s.id)) continue;
      const std::size_t p = pick(task_rng_);
      std::size_t d = pick_other(task_rng_);
      if (d >= p) ++d;
      Task t;
      t.id = static_cast<TaskId>(tasks_.size());
      t.pickup = map_.cell(task_cells_[p]);
      t.delivery = map_.cell(task_cells_[d]);
      t.release = now;
      t.phase = TaskPhase::Unassigned;
      tasks_.push_back(t);
      queue.push_back({s.id, t.id, false});
    }
    const auto fetched = fetch_guidance(queue);
    auto ctx = idle_context(queue);
    std::size_t pos = 0;
    for (const auto& e : queue) {
      const GuidancePair g = fetched.empty() ? zero_pair() : fetched[pos];
      ++pos;
      if (!execute_entry(e, g) && !e.delayed) {
        // the fresh task is dropped; the agent draws another next timestep
        tasks_[*e.task].phase = TaskPhase::Unreleased;
        idle(e.agent, ctx);
      }
    }
  }

  GuidancePair zero_pair() const {
    return {GuidanceMap::zero(map_.width(), map_.height()), GuidanceMap::zero(map_.width(), map_.height())};
  }

  SimulationResult finish(double elapsed_ms) {
    SimulationResult result;
    auto& m = metrics_;
    m.elapsed = token_.now();
    double st_sum = 0.0;
    for (const auto& t : tasks_) {
      if (baseline_ && t.phase == TaskPhase::Unreleased) continue;
      ++m.total_tasks;
      m.records.push_back({t.id, t.release, t.agent, t.assigned_at, t.picked_up_at, t.completed_at});
      if (t.phase == TaskPhase::Completed) st_sum += t.completed_at - t.release;
    }
    if (m.completed > 0) m.service_time_mean = st_sum / m.completed;
    m.throughput = m.elapsed > 0 ? static_cast<double>(m.completed) / m.elapsed : 0.0;
    m.total_expanded_millions = static_cast<double>(m.expanded) / 1e6;
    m.runtime_per_timestep_ms = m.elapsed > 0 ? elapsed_ms / m.elapsed : 0.0;
    result.metrics = std::move(m);
    result.config = config_;
    result.seed = config_.seed;
    result.final_agents.assign(token_.agents().begin(), token_.agents().end());
    result.events = std::move(events_);
    return result;
  }

  const GridMap& map_;
  RunConfig config_;
  const RunHooks& hooks_;
  bool baseline_;
  std::vector<Task> tasks_;
  Token token_;
  std::mt19937_64 delay_rng_;
  std::mt19937_64 recovery_rng_;
  std::mt19937_64 task_rng_;
  std::unique_ptr<GuidanceProvider> provider_;
  std::int64_t max_iters_;
  int horizon_ = 0;
  std::vector<int> task_cells_;
  Metrics metrics_;
  std::vector<std::string> events_;
};

}  // namespace

int default_horizon(const GridMap& map, int n_agents) {
  return 10 * (map.passable_count() + n_agents * (map.width() + map.height()));
}

SimulationResult run(const Instance& instance, const RunConfig& config, const RunHooks& hooks) {
  config.validate();
  if (config.assignment == AssignmentMode::RandomBaseline) return random_assign_baseline(instance, config, hooks);
  Simulation sim(instance, config, hooks, false);
  return sim.execute();
}

SimulationResult run(const RunConfig& config, const RunHooks& hooks) { return run(load_instance(config), config, hooks); }

SimulationResult random_assign_baseline(const Instance& instance, const RunConfig& config, const RunHooks& hooks) {
  config.validate();
  if (config.termination != TerminationMode::FixedHorizon)
    throw ContractError("the random-assignment baseline needs a fixed horizon");
  if (instance.map.task_endpoints().size() < 2) throw ContractError("the map needs at least two task endpoints");
  Instance fresh{instance.map, {}, instance.starts};
  Simulation sim(fresh, config, hooks, true);
  return sim.execute();
}

SimulationResult random_assign_baseline(const RunConfig& config, const RunHooks& hooks) {
  auto cfg = config;
  cfg.gen_tasks = 0;
  cfg.task_path.clear();
  return random_assign_baseline(load_instance(cfg), config, hooks);
}

std::string metrics_json(const SimulationResult& result) {
  const auto& m = result.metrics;
  const auto& c = result.config;
  nlohmann::ordered_json j;
  j["config"] = {
      {"map", c.map_path},
      {"tasks", c.task_path},
      {"gen_tasks", c.gen_tasks},
      {"frequency", c.frequency.to_string()},
      {"agents", c.n_agents},
      {"delay_p", c.delay_p},
      {"max_iters", c.max_iters},
      {"recovery_radius", c.recovery_radius},
      {"guidance", to_string(c.guidance)},
      {"horizon", c.horizon},
      {"termination", termination_name(c.termination)},
      {"assignment", assignment_name(c.assignment)},
      {"seed", c.seed},
  };
  j["st"] = m.service_time_mean ? nlohmann::ordered_json(*m.service_time_mean) : nlohmann::ordered_json(nullptr);
  j["rt"] = m.runtime_per_timestep_ms;
  j["tp"] = m.throughput;
  j["iters"] = m.total_expanded_millions;
  j["completed"] = m.completed;
  j["total_tasks"] = m.total_tasks;
  j["elapsed"] = m.elapsed;
  j["incomplete"] = m.incomplete;
  j["delays"] = m.delays;
  j["recoveries"] = m.recoveries;
  j["yields"] = m.yields;
  j["forced_waits"] = m.forced_waits;
  return j.dump(2);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 over the pair
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<MatrixRow> run_matrix(const std::vector<MatrixCell>& cells, int seeds, int threads) {
  if (cells.empty()) throw ContractError("run_matrix needs at least one config");
  if (seeds < 1) throw ContractError("run_matrix needs at least one seed");
  struct Job {
    std::size_t cell;
    int k;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int k = 0; k < seeds; ++k) jobs.push_back({c, k});

  struct Outcome {
    std::optional<SimulationResult> result;
    std::string error;
  };
  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      auto cfg = cells[jobs[i].cell].config;
      cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(jobs[i].k));
      try {
        outcomes[i].result = run(cfg);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  int n_threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = std::min<int>(n_threads, static_cast<int>(jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<MatrixRow> rows(cells.size());
  std::vector<int> st_count(cells.size(), 0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    rows[c].label = cells[c].label;
    rows[c].config = cells[c].config;
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& row = rows[jobs[i].cell];
    ++row.runs;
    const auto& o = outcomes[i];
    if (!o.result) {
      ++row.failures;
      row.errors.push_back(o.error);
      continue;
    }
    const auto& m = o.result->metrics;
    if (m.incomplete) ++row.incomplete;
    if (m.service_time_mean) {
      row.st += *m.service_time_mean;
      ++st_count[jobs[i].cell];
    }
    row.tp += m.throughput;
    row.rt += m.runtime_per_timestep_ms;
    row.iters += m.total_expanded_millions;
  }
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const int ok = rows[c].runs - rows[c].failures;
    if (st_count[c] > 0) rows[c].st /= st_count[c];
    if (ok > 0) {
      rows[c].tp /= ok;
      rows[c].rt /= ok;
      rows[c].iters /= ok;
    }
  }
  return rows;
}

std::string matrix_csv(const std::vector<MatrixRow>& rows) {
  std::ostringstream out;
  out << "label,map,agents,frequency,delay_p,runs,failures,incomplete,st,tp,rt,iters\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.config.map_path << ',' << r.config.n_agents << ',' << r.config.frequency.to_string()
        << ',' << r.config.delay_p << ',' << r.runs << ',' << r.failures << ',' << r.incomplete << ',' << r.st << ','
        << r.tp << ',' << r.rt << ',' << r.iters << '\n';
  }
  return out.str();
}

}  // namespace attf
