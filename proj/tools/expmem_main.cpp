#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "expmem/embedding.hpp"
#include "expmem/errors.hpp"
#include "expmem/fillers.hpp"
#include "expmem/orchestrator.hpp"
#include "expmem/remote_backend.hpp"
#include "expmem/scripted_backend.hpp"
#include "expmem/wire.hpp"

namespace fs = std::filesystem;
using namespace expmem;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitTaskFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBackend = 3;
constexpr int kExitReplayDivergence = 4;

struct BackendChoice {
    std::unique_ptr<VlmBackend> vlm;
    std::unique_ptr<Embedder> embedder;
};

BackendChoice make_backend(const std::string& name, const std::string& model,
                           const std::string& base_url, std::uint64_t seed) {
    BackendChoice out;
    if (name == "scripted-naive") {
        out.vlm = std::make_unique<ScriptedBackend>(PlannerPolicy::kNaive);
    } else if (name == "scripted-reflective") {
        out.vlm = std::make_unique<ScriptedBackend>(PlannerPolicy::kReflective);
    } else if (name == "scripted-memory-aware") {
        out.vlm = std::make_unique<ScriptedBackend>(PlannerPolicy::kMemoryAware);
    } else if (name == "remote") {
        const char* key_env = std::getenv("EXPMEM_API_KEY");
        const char* url_env = std::getenv("EXPMEM_BASE_URL");
        const std::string url = !base_url.empty() ? base_url
                                : url_env         ? url_env
                                                  : "";
        if (url.empty())
            throw std::invalid_argument(
                "remote backend needs --base-url or EXPMEM_BASE_URL");
        auto transport = std::make_shared<HttplibTransport>(url);
        out.vlm = std::make_unique<RemoteBackend>(transport, model,
                                                  key_env ? key_env : "");
        out.embedder = std::make_unique<CachingEmbedder>(
            std::make_shared<RemoteEmbedder>(transport, "text-embedding-3-large",
                                             key_env ? key_env : ""));
        return out;
    } else {
        throw std::invalid_argument("unknown backend: " + name);
    }
    out.embedder = std::make_unique<LocalEmbedder>(256, seed ^ 0x5eed);
    return out;
}

MemoryMode parse_memory(const std::string& s) {
    if (s == "none") return MemoryMode::kNone;
    if (s == "stm") return MemoryMode::kStmOnly;
    if (s == "stm+ltm") return MemoryMode::kStmAndLtm;
    throw std::invalid_argument("unknown memory mode: " + s);
}

RetrievalMode parse_retrieval(const std::string& s) {
    if (s == "rag") return RetrievalMode::kRag;
    if (s == "random") return RetrievalMode::kRandomK;
    if (s == "all") return RetrievalMode::kAll;
    if (s == "none") return RetrievalMode::kNone;
    throw std::invalid_argument("unknown retrieval mode: " + s);
}

MemoryStore open_store(const std::string& path) {
    if (!path.empty() && fs::exists(path)) return MemoryStore::load(path);
    return MemoryStore{};
}

void print_transcript(std::ostream& out, const EpisodeResult& result,
                      const Scenario& scenario, int attempts_allowed) {
    out << "Instruction: " << scenario.instruction << "\n";
    for (const auto& s : result.steps) {
        out << "\n[step " << s.step << "]\n";
        out << "Response from VLM Task Planner: "
            << wire::action_to_tool_call(s.action).dump() << "\n";
        if (s.selected_label)
            out << "Annotation selection: option " << *s.selected_label << "\n";
        out << "Effect: " << to_string(s.effect.kind) << " (" << s.effect.detail
            << ")\n";
        out << "Response from VLM Success Detector: "
            << wire::feedback_to_tool_call(s.feedback).dump() << "\n";
        if (s.reset_after)
            out << "[operator reset; attempt " << result.attempts_used << "/"
                << attempts_allowed << "]\n";
    }
    for (const auto& n : result.stm.operator_notes)
        out << "\nObservation from human (step " << n.step << "): " << n.text << "\n";
    out << "\nOutcome: " << (result.completed ? "task completed" : "task failed")
        << " after " << result.steps_taken << " step(s), " << result.attempts_used
        << " attempt(s).\n";
    if (!result.summary.empty()) {
        out << "Experience stored to long-term memory (lesson: " << result.lesson
            << "):\n" << result.summary << "\n";
    }
}

std::vector<Scenario> load_suite_scenarios(const std::string& dir,
                                           const std::vector<std::string>& names) {
    std::vector<Scenario> out;
    for (const auto& n : names)
        out.push_back(Scenario::load((fs::path(dir) / (n + ".json")).string()));
    return out;
}

const std::vector<std::string> kStmNames = {"stm_apple_plate", "stm_candy_banana",
                                            "stm_egg_banana", "stm_bowl"};
const std::vector<std::string> kLtmNames = {
    "ltm_apple_plate", "ltm_candy_banana", "ltm_egg_banana",   "ltm_bowl",
    "ltm_tennis_box",  "ltm_orange_plate", "ltm_paper_box",    "ltm_screw_toolbox",
    "ltm_sushi_plate", "ltm_grape_banana", "ltm_box_apple",    "ltm_towel_orange"};

/// Runs the four STM episodes with write-back and pads with 96 fillers,
/// giving the 100-entry store the LTM evaluations start from.
void build_ltm_store(MemoryStore& store, Embedder& embedder, LogicalClock& clock,
                     const std::string& scenario_dir, std::uint64_t seed) {
    for (const auto& name : kStmNames) {
        const Scenario scenario =
            Scenario::load((fs::path(scenario_dir) / (name + ".json")).string());
        ScriptedBackend backend(PlannerPolicy::kReflective);
        EpisodeConfig config;
        config.memory_mode = MemoryMode::kStmAndLtm;
        config.retrieval_mode = RetrievalMode::kNone;
        config.write_back = true;
        config.seed = seed;
        run_episode(scenario, config, &store, backend, &embedder, &clock);
    }
    seed_fillers(store, embedder, 96, seed, clock);
}

int cmd_run(const std::string& scenario_path, const std::string& backend_name,
            const std::string& model, const std::string& base_url,
            const std::string& memory, const std::string& retrieval,
            const std::string& store_path, std::size_t k, std::size_t context_cap,
            std::uint64_t seed, const std::string& out_dir, bool interactive,
            bool write_back, int max_steps) {
    Scenario scenario;
    try {
        scenario = Scenario::load(scenario_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    EpisodeConfig config;
    config.memory_mode = parse_memory(memory);
    config.retrieval_mode = parse_retrieval(retrieval);
    config.k = k;
    config.context_cap = context_cap;
    config.seed = seed;
    config.write_back = write_back;
    config.max_steps = max_steps;

    BackendChoice backend = make_backend(backend_name, model, base_url, seed);
    MemoryStore store = open_store(store_path);
    MemoryStore* store_ptr =
        config.memory_mode == MemoryMode::kStmAndLtm ? &store : nullptr;
    LogicalClock clock;

    PostStepHook hook;
    if (interactive) {
        hook = [](const EpisodeResult& partial) -> std::optional<std::string> {
            std::cout << "operator note after step "
                      << partial.steps.back().step << " (empty to continue): "
                      << std::flush;
            std::string line;
            if (!std::getline(std::cin, line) || line.empty()) return std::nullopt;
            return line;
        };
    }

    EpisodeResult result;
    try {
        result = run_episode(scenario, config, store_ptr, *backend.vlm,
                             backend.embedder.get(), &clock, hook);
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const ProtocolViolation& e) {
        std::cerr << "protocol violation: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    print_transcript(std::cout, result, scenario,
                     config.attempts_allowed.value_or(scenario.attempts_allowed));

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path log_path = fs::path(out_dir) / (scenario.name + "_" +
                                                       std::to_string(seed) + ".jsonl");
        std::ofstream log(log_path);
        write_episode_log(log, scenario, scenario_path, config,
                          backend.vlm->name(), result);
        std::cout << "episode log: " << log_path.string() << "\n";
    }
    if (write_back && !store_path.empty()) store.save(store_path);

    return result.completed ? kExitSuccess : kExitTaskFailure;
}

int cmd_suite(const std::string& preset, const std::string& scenario_dir,
              const std::string& store_path, int trials, std::uint64_t seed,
              const std::string& out_dir, std::size_t k, std::size_t context_cap) {
    LocalEmbedder embedder(256, seed ^ 0x5eed);
    LogicalClock clock;
    MemoryStore store;

    std::vector<Scenario> scenarios;
    std::vector<SuiteCondition> conditions;

    auto cond = [&](const std::string& label, PlannerPolicy policy, MemoryMode mm,
                    RetrievalMode rm, bool planning_only) {
        SuiteCondition c;
        c.label = label;
        c.policy = policy;
        c.config.memory_mode = mm;
        c.config.retrieval_mode = rm;
        c.config.k = k;
        c.config.context_cap = context_cap;
        c.planning_only = planning_only;
        return c;
    };

    if (preset == "stm") {
        scenarios = load_suite_scenarios(scenario_dir, kStmNames);
        conditions = {
            cond("cap-v", PlannerPolicy::kNaive, MemoryMode::kNone,
                 RetrievalMode::kNone, false),
            cond("stm-reflect", PlannerPolicy::kReflective, MemoryMode::kStmOnly,
                 RetrievalMode::kNone, false),
        };
        if (trials <= 0) trials = 1;
    } else if (preset == "ltm") {
        build_ltm_store(store, embedder, clock, scenario_dir, seed);
        scenarios = load_suite_scenarios(scenario_dir, kLtmNames);
        conditions = {
            cond("comerobot", PlannerPolicy::kNaive, MemoryMode::kStmOnly,
                 RetrievalMode::kNone, false),
            cond("ltm-rag", PlannerPolicy::kMemoryAware, MemoryMode::kStmAndLtm,
                 RetrievalMode::kRag, false),
        };
        if (trials <= 0) trials = 1;
    } else if (preset == "ablation") {
        build_ltm_store(store, embedder, clock, scenario_dir, seed);
        scenarios = load_suite_scenarios(scenario_dir, kLtmNames);
        conditions = {
            cond("entire-ltm", PlannerPolicy::kMemoryAware, MemoryMode::kStmAndLtm,
                 RetrievalMode::kAll, true),
            cond("random-k", PlannerPolicy::kMemoryAware, MemoryMode::kStmAndLtm,
                 RetrievalMode::kRandomK, true),
            cond("rag", PlannerPolicy::kMemoryAware, MemoryMode::kStmAndLtm,
                 RetrievalMode::kRag, true),
        };
        if (trials <= 0) trials = 20;
    } else {
        std::cerr << "error: unknown suite preset: " << preset << "\n";
        return kExitUsage;
    }

    const SuiteResult result =
        run_suite(scenarios, conditions, &store, &embedder, trials, seed);
    std::cout << result.table_text();

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream table(fs::path(out_dir) / (preset + "_table.txt"));
        table << result.table_text();
        std::ofstream rows(fs::path(out_dir) / (preset + "_rows.jsonl"));
        rows << result.rows_jsonl();
        std::cout << "wrote " << (fs::path(out_dir) / (preset + "_table.txt")).string()
                  << "\n";
    }
    if (!store_path.empty() && store.size() > 0) store.save(store_path);
    return kExitSuccess;
}

int cmd_memory(const std::string& subcommand, const std::string& store_path,
               std::uint64_t id, const std::string& export_path, std::size_t count,
               std::uint64_t seed) {
    MemoryStore store = open_store(store_path);

    if (subcommand == "ls") {
        for (const auto& r : store.retrieve_all()) {
            std::string summary = r.summary.substr(0, 60);
            std::cout << r.id << "\t" << r.key.instruction << "\t" << summary << "\n";
        }
        return kExitSuccess;
    }
    if (subcommand == "show") {
        const auto rec = store.find(id);
        if (!rec) {
            std::cerr << "error: no record with id " << id << "\n";
            return kExitUsage;
        }
        std::cout << "id: " << rec->id << "\ninstruction: " << rec->key.instruction
                  << "\nscene: " << rec->key.scene_description
                  << "\nsummary: " << rec->summary << "\nlesson: " << rec->lesson
                  << "\nembedding dimension: " << rec->embedding.size()
                  << "\nepisode: " << rec->episode_id
                  << "\ncreated_at: " << rec->created_at << "\n";
        return kExitSuccess;
    }
    if (subcommand == "export") {
        store.save(export_path);
        std::cout << "exported " << store.size() << " records to " << export_path
                  << "\n";
        return kExitSuccess;
    }
    if (subcommand == "seed-fillers") {
        LocalEmbedder embedder(256, seed ^ 0x5eed);
        LogicalClock clock(1735689600 + std::int64_t(store.size()));
        seed_fillers(store, embedder, count, seed, clock);
        store.save(store_path);
        std::cout << "store now holds " << store.size() << " records\n";
        return kExitSuccess;
    }
    std::cerr << "error: unknown memory subcommand\n";
    return kExitUsage;
}

int cmd_replay(const std::string& log_path) {
    const ReplayOutcome outcome = replay_log(log_path);
    switch (outcome.status) {
        case ReplayOutcome::Status::kOk:
            std::cout << "replay ok: every logged effect reproduced\n";
            return kExitSuccess;
        case ReplayOutcome::Status::kBadLog:
            std::cerr << "error: " << outcome.message << "\n";
            return kExitUsage;
        case ReplayOutcome::Status::kDivergence:
            std::cerr << "replay divergence: " << outcome.message << "\n";
            return kExitReplayDivergence;
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"expmem: closed-loop tabletop planning with self-generated memory"};
    app.require_subcommand(1);

    // run
    std::string scenario_path, backend_name = "scripted-reflective";
    std::string model = "gpt-4o", base_url;
    std::string memory = "stm", retrieval = "none", store_path, out_dir;
    std::size_t k = 5, context_cap = 5;
    std::uint64_t seed = 0;
    bool interactive = false, write_back = false;
    int max_steps = 12;

    auto* run = app.add_subcommand("run", "Run one episode");
    run->add_option("--scenario", scenario_path, "Scenario file")->required();
    run->add_option("--backend", backend_name,
                    "scripted-naive|scripted-reflective|scripted-memory-aware|remote");
    run->add_option("--model", model, "Remote model name");
    run->add_option("--base-url", base_url, "Remote base URL");
    run->add_option("--memory", memory, "none|stm|stm+ltm");
    run->add_option("--retrieval", retrieval, "rag|random|all|none");
    run->add_option("--store", store_path, "Long-term memory store file");
    run->add_option("--k", k, "Retrieval k");
    run->add_option("--context-cap", context_cap, "Context entry cap");
    run->add_option("--seed", seed, "Run seed");
    run->add_option("--out", out_dir, "Directory for the episode log");
    run->add_option("--max-steps", max_steps, "Step budget");
    run->add_flag("--interactive", interactive, "Prompt for operator notes");
    run->add_flag("--write-back", write_back, "Store the experience on success");

    // suite
    std::string preset, scenario_dir = "scenarios";
    int trials = 0;
    auto* suite = app.add_subcommand("suite", "Run a scenario suite");
    suite->add_option("--suite", preset, "stm|ltm|ablation")->required();
    suite->add_option("--scenarios", scenario_dir, "Scenario directory");
    suite->add_option("--store", store_path, "Write the built store here");
    suite->add_option("--trials", trials, "Trials per cell");
    suite->add_option("--seed", seed, "Base seed");
    suite->add_option("--out", out_dir, "Directory for table files");
    suite->add_option("--k", k, "Retrieval k");
    suite->add_option("--context-cap", context_cap, "Context entry cap");

    // memory
    std::uint64_t record_id = 0;
    std::string export_path;
    std::size_t filler_count = 96;
    auto* mem = app.add_subcommand("memory", "Inspect or build a memory store");
    auto* mem_ls = mem->add_subcommand("ls", "List records");
    auto* mem_show = mem->add_subcommand("show", "Show one record");
    mem_show->add_option("id", record_id, "Record id")->required();
    auto* mem_export = mem->add_subcommand("export", "Export the store");
    mem_export->add_option("path", export_path, "Destination file")->required();
    auto* mem_seed = mem->add_subcommand("seed-fillers", "Append synthetic records");
    mem_seed->add_option("count", filler_count, "How many records");
    mem->require_subcommand(1);
    mem->add_option("--store", store_path, "Store file")->required();
    mem->add_option("--seed", seed, "Generator seed");

    // replay
    std::string log_path;
    auto* replay = app.add_subcommand("replay", "Re-verify an episode log");
    replay->add_option("log", log_path, "Episode log file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (run->parsed())
            return cmd_run(scenario_path, backend_name, model, base_url, memory,
                           retrieval, store_path, k, context_cap, seed, out_dir,
                           interactive, write_back, max_steps);
        if (suite->parsed())
            return cmd_suite(preset, scenario_dir, store_path, trials, seed, out_dir,
                             k, context_cap);
        if (mem->parsed()) {
            std::string sub = mem_ls->parsed()       ? "ls"
                              : mem_show->parsed()   ? "show"
                              : mem_export->parsed() ? "export"
                                                     : "seed-fillers";
            return cmd_memory(sub, store_path, record_id, export_path, filler_count,
                              seed);
        }
        if (replay->parsed()) return cmd_replay(log_path);
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
