#include "commands.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <sstream>

#include "wrecon/checkpoint.hpp"
#include "wrecon/config.hpp"
#include "wrecon/datastore.hpp"
#include "wrecon/errors.hpp"
#include "wrecon/evaluator.hpp"
#include "wrecon/infolab.hpp"
#include "wrecon/pipeline.hpp"
#include "wrecon/plot.hpp"
#include "wrecon/trainer.hpp"

namespace wrecon::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string data;
};

void add_common(CLI::App* cmd, Common& c, bool with_data) {
    cmd->add_option("--config", c.config, "JSON run configuration");
    cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
    cmd->add_option("--out", c.out, "Output directory");
    if (with_data) cmd->add_option("--data", c.data, "Dataset directory (default: paths.data)");
}

RunConfig load_config(const Common& c) {
    RunConfig rc = c.config.empty() ? RunConfig::from_json(json::object()) : RunConfig::load(c.config);
    if (c.seed) rc.seed = *c.seed;
    rc.derive();
    rc.validate();
    return rc;
}

fs::path pick(const std::string& flag, const std::string& fallback) { return flag.empty() ? fs::path(fallback) : fs::path(flag); }

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << text;
    if (!out) throw IoError("write failed for " + file.string());
}

void echo_config(const RunConfig& rc, const fs::path& dir) { write_text(dir / "config.json", rc.to_json().dump(2) + "\n"); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<AvailabilityMask> parse_masks(const VariableUniverse& u, const std::vector<std::string>& specs) {
    std::vector<AvailabilityMask> out;
    for (const auto& s : specs) {
        try {
            out.push_back(AvailabilityMask::parse(u, s));
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    }
    if (out.empty()) throw ConfigError("no masks given");
    return out;
}

std::string checkpoint_id(const fs::path& p, const Checkpoint& ck) {
    return p.filename().string() + "@epoch" + std::to_string(ck.epoch);
}

void print_report(std::ostream& out, const MetricsReport& r) {
    out << "mask " << r.mask << " (" << r.samples << " samples)\n";
    for (const auto& d : r.depths)
        out << "  " << d.level << " m  rmse " << d.rmse << "  mae " << d.mae << "  pcc " << d.pcc << "\n";
}

int cmd_gen(const Common& c, std::ostream& out) {
    const RunConfig rc = load_config(c);
    const fs::path dir = pick(c.out, rc.paths.data);
    const SynthConfig sc = rc.synth();
    out << "generating " << sc.steps << " snapshots of " << sc.height << "x" << sc.width << " into " << dir << "\n";
    const SynthOutput gen = generate_synthetic(sc);
    json prov = {{"generator", kGeneratorVersion}, {"synth", to_json(sc)}};
    const DatasetManifest m =
        write_dataset(gen.samples, contiguous_splits(rc.dataset.t_train, rc.dataset.t_val, rc.dataset.t_test),
                      VariableUniverse(sc.variables), dir, prov.dump());
    echo_config(rc, dir);
    out << "wrote " << m.samples << " samples (train " << m.t_train() << ", val " << m.t_val() << ", test "
        << m.t_test() << ")\n";
    return 0;
}

int cmd_train(const Common& c, const std::string& resume, const std::string& variant, std::ostream& out) {
    RunConfig rc = load_config(c);
    if (!variant.empty()) rc.model.variant = parse_variant(variant);
    const fs::path data_dir = pick(c.data, rc.paths.data);
    const fs::path out_dir = pick(c.out, rc.paths.out);
    const Dataset ds = Dataset::load(data_dir);
    fs::create_directories(out_dir);
    echo_config(rc, out_dir);
    TrainOptions opts;
    opts.out_dir = out_dir;
    opts.log = &out;
    opts.extra_config = rc.to_json();
    if (!resume.empty()) opts.resume = resume;
    const TrainResult r = train(ds, rc.model, rc.policy, rc.train, opts);
    out << "finished epoch " << r.last.epoch << "; checkpoints in " << out_dir << "\n";
    return 0;
}

fs::path default_checkpoint(const RunConfig& rc, const std::string& flag) {
    if (!flag.empty()) return flag;
    const fs::path best = fs::path(rc.paths.out) / "best.ckpt";
    return fs::exists(best) ? best : fs::path(rc.paths.out) / "last.ckpt";
}

int cmd_eval(const Common& c, const std::string& ckpt_flag, const std::string& masks, const std::string& split_flag,
             bool dump, std::ostream& out) {
    const RunConfig rc = load_config(c);
    const std::string split = split_flag.empty() ? rc.eval.split : split_flag;
    const fs::path ckpt_path = default_checkpoint(rc, ckpt_flag);
    const Checkpoint ck = load_checkpoint(ckpt_path);
    auto model = model_from_checkpoint(ck);
    const Dataset ds = Dataset::load(pick(c.data, rc.paths.data));
    const auto& u = ds.manifest.universe;
    const auto specs = masks.empty() ? std::vector<std::string>{AvailabilityMask::full(u.size()).to_string(u)}
                                     : split_list(masks);
    const auto family = parse_masks(u, specs);
    const fs::path out_dir = pick(c.out, rc.paths.out);
    std::vector<MetricsReport> reports;
    json j = json::array();
    for (const auto& m : family) {
        reports.push_back(evaluate(*model, ds, m, split, checkpoint_id(ckpt_path, ck)));
        print_report(out, reports.back());
        j.push_back(reports.back().to_json());
    }
    write_text(out_dir / "metrics.json", j.dump(2) + "\n");
    write_text(out_dir / "metrics.csv", metrics_csv_header(false) + metrics_csv_rows(reports));
    if (dump) {
        write_text(out_dir / "fields.json", dump_fields(*model, ds, family.front(), split).dump() + "\n");
        out << "field dump written to " << (out_dir / "fields.json") << "\n";
    }
    echo_config(rc, out_dir);
    return 0;
}

int cmd_sweep(const Common& c, const std::string& ckpt_flag, const std::string& masks, const std::string& split_flag,
              std::ostream& out) {
    const RunConfig rc = load_config(c);
    const std::string split = split_flag.empty() ? rc.eval.split : split_flag;
    const fs::path ckpt_path = default_checkpoint(rc, ckpt_flag);
    const Checkpoint ck = load_checkpoint(ckpt_path);
    auto model = model_from_checkpoint(ck);
    const Dataset ds = Dataset::load(pick(c.data, rc.paths.data));
    const auto family = parse_masks(ds.manifest.universe, masks.empty() ? rc.eval.masks : split_list(masks));
    const SweepResult r = sweep_subsets(*model, ds, family, split, checkpoint_id(ckpt_path, ck));
    for (const auto& rep : r.reports) print_report(out, rep);
    const fs::path out_dir = pick(c.out, rc.paths.out);
    write_text(out_dir / "sweep.json", r.to_json().dump(2) + "\n");
    write_text(out_dir / "sweep.csv", metrics_csv_header(false) + metrics_csv_rows(r.reports));
    echo_config(rc, out_dir);
    return 0;
}

int cmd_ablate(const Common& c, const std::string& variants, const std::string& masks, const std::string& checkpoints,
               std::ostream& out) {
    const RunConfig rc = load_config(c);
    const Dataset ds = Dataset::load(pick(c.data, rc.paths.data));
    const auto scenarios = parse_masks(ds.manifest.universe, masks.empty() ? rc.eval.masks : split_list(masks));
    const fs::path out_dir = pick(c.out, rc.paths.out);
    AblationResult r;
    if (!checkpoints.empty()) {
        std::vector<Checkpoint> cks;
        for (const auto& p : split_list(checkpoints)) cks.push_back(load_checkpoint(p));
        r = ablate(cks, ds, scenarios, rc.eval.split);
    } else {
        std::vector<Variant> vs;
        for (const auto& v : variants.empty() ? rc.eval.variants : split_list(variants)) vs.push_back(parse_variant(v));
        r = train_and_ablate(ds, rc.model, vs, rc.policy, rc.train, scenarios, rc.eval.split, out_dir, &out);
    }
    for (const auto& e : r.entries) {
        out << "variant " << to_string(e.variant) << " (" << e.parameters << " parameters)\n";
        for (const auto& rep : e.reports) print_report(out, rep);
    }
    write_text(out_dir / "ablation.json", r.to_json().dump(2) + "\n");
    write_text(out_dir / "ablation.csv", r.csv());
    echo_config(rc, out_dir);
    return 0;
}

int cmd_entropy(const Common& c, int trials, std::ostream& out) {
    EntropySuiteOptions opts;
    opts.trials = trials;
    opts.seed = c.seed.value_or(0);
    const EntropySuiteReport r = run_entropy_suite(opts);
    for (const auto* s : {&r.discrete, &r.independence, &r.gaussian, &r.plugin})
        out << s->name << ": " << s->passed << "/" << s->trials << " passed (min gap " << s->min_gap << ")\n";
    out << "mean information H(w) - H(w | SSH,U,V,B) on synthetic pixels: " << r.plugin_mean_information << " nats\n";
    out << (r.passed() ? "PASS" : "FAIL") << "\n";
    if (!c.out.empty()) write_text(fs::path(c.out) / "entropy_report.json", r.to_json().dump(2) + "\n");
    return r.passed() ? 0 : static_cast<int>(ExitCode::numeric);
}

int cmd_plot(const std::string& csv, const std::string& fields, const std::string& out_flag, std::ostream& out) {
    if (csv.empty() && fields.empty()) throw ConfigError("plot needs --csv and/or --fields");
    const fs::path out_dir = out_flag.empty() ? fs::path("plots") : fs::path(out_flag);
    // Parse everything before writing anything.
    std::vector<MetricsRow> rows;
    json dump;
    if (!csv.empty()) {
        std::ifstream in(csv);
        if (!in) throw IoError("cannot open " + csv);
        std::stringstream ss;
        ss << in.rdbuf();
        rows = parse_metrics_csv(ss.str());
    }
    if (!fields.empty()) {
        std::ifstream in(fields);
        if (!in) throw IoError("cannot open " + fields);
        try {
            dump = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError(std::string("field dump is not valid JSON: ") + e.what());
        }
    }
    std::vector<fs::path> written;
    if (!rows.empty()) written = plot_metrics(rows, out_dir);
    if (!dump.is_null()) {
        const auto more = plot_fields(dump, out_dir);
        written.insert(written.end(), more.begin(), more.end());
    }
    for (const auto& p : written) out << "wrote " << p.string() << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Subsurface vertical-velocity reconstruction from partial surface observations", "wrecon"};
    app.require_subcommand(1);

    Common gen_c, train_c, eval_c, sweep_c, ablate_c, ent_c;
    std::string resume, variant, ckpt, masks, split, variants, checkpoints, csv, fields, plot_out;
    bool dump = false;
    int trials = 100;

    auto* gen = app.add_subcommand("gen", "Generate the synthetic dataset");
    add_common(gen, gen_c, false);

    auto* tr = app.add_subcommand("train", "Train a model");
    add_common(tr, train_c, true);
    tr->add_option("--resume", resume, "Checkpoint to resume from");
    tr->add_option("--variant", variant, "Model variant (full, no_scp, no_gsao)");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_common(ev, eval_c, true);
    ev->add_option("--checkpoint", ckpt, "Checkpoint file (default: paths.out/best.ckpt)");
    ev->add_option("--masks", masks, "Comma-separated masks, e.g. SSH,SSH+U+V");
    ev->add_option("--split", split, "Split to evaluate (default: eval.split)");
    ev->add_flag("--dump-fields", dump, "Also write prediction/target grids of one sample");

    auto* sw = app.add_subcommand("sweep", "Evaluate a checkpoint over a family of masks");
    add_common(sw, sweep_c, true);
    sw->add_option("--checkpoint", ckpt, "Checkpoint file (default: paths.out/best.ckpt)");
    sw->add_option("--masks", masks, "Comma-separated masks (default: eval.masks)");
    sw->add_option("--split", split, "Split to evaluate (default: eval.split)");

    auto* ab = app.add_subcommand("ablate", "Train and compare model variants");
    add_common(ab, ablate_c, true);
    ab->add_option("--variants", variants, "Comma-separated variants (default: eval.variants)");
    ab->add_option("--masks", masks, "Comma-separated scenarios (default: eval.masks)");
    ab->add_option("--checkpoints", checkpoints, "Comma-separated trained checkpoints instead of training");

    auto* en = app.add_subcommand("entropy-check", "Verify conditional-entropy monotonicity");
    en->add_option("--trials", trials, "Trials per randomized section");
    en->add_option("--seed", ent_c.seed, "Seed");
    en->add_option("--out", ent_c.out, "Directory for entropy_report.json");

    auto* pl = app.add_subcommand("plot", "Render metric charts and field heatmaps as SVG");
    pl->add_option("--csv", csv, "Metrics CSV from eval, sweep or ablate");
    pl->add_option("--fields", fields, "Field dump from eval --dump-fields");
    pl->add_option("--out", plot_out, "Output directory (default: plots)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
            err << sub->help();
        return static_cast<int>(ExitCode::config);
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_c, out);
        if (tr->parsed()) return cmd_train(train_c, resume, variant, out);
        if (ev->parsed()) return cmd_eval(eval_c, ckpt, masks, split, dump, out);
        if (sw->parsed()) return cmd_sweep(sweep_c, ckpt, masks, split, out);
        if (ab->parsed()) return cmd_ablate(ablate_c, variants, masks, checkpoints, out);
        if (en->parsed()) return cmd_entropy(ent_c, trials, out);
        if (pl->parsed()) return cmd_plot(csv, fields, plot_out, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_of(e);
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::io);
    } catch (const json::exception& e) {
        err << "error: malformed JSON: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    }
    return static_cast<int>(ExitCode::config);
}

}  // namespace wrecon::cli
