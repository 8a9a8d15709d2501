#include "chatty/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "CLI11.hpp"

#include "chatty/checkpoint.hpp"
#include "chatty/config.hpp"
#include "chatty/data.hpp"
#include "chatty/errors.hpp"
#include "chatty/matrix.hpp"
#include "chatty/model.hpp"
#include "chatty/svg.hpp"
#include "chatty/train.hpp"
#include "chatty/verify.hpp"

namespace chatty {
namespace {

std::string fmt_full(Real v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(Real v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParamError("cannot open for writing: " + path);
    out << content;
    if (!out) throw ParamError("write failed: " + path);
}

// Seed override from the environment; the --seed flag takes precedence over it.
std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("CHATTY_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    const std::string text(raw);
    if (text[0] == '-') throw ParamError("CHATTY_SEED: must be a non-negative integer, got '" + text + "'");
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParamError("CHATTY_SEED: must be a non-negative integer, got '" + text + "'");
    }
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

Real parse_real_field(const std::string& text, const std::string& path, int lineno) {
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (text.empty() || end != begin + text.size()) {
        throw ParamError(path + ": line " + std::to_string(lineno) + ": not a number: '" + text + "'");
    }
    return v;
}

// Reads a logit snapshot written as z0,...,z{c-1} header plus one row per
// sample. Header names must match exactly to guard against feeding in a
// metrics or dataset file by mistake.
Mat load_snapshot_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError("cannot read snapshot file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParamError(path + ": empty file");
    const std::vector<std::string> header = split_commas(strip_cr(line));
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] != "z" + std::to_string(j)) {
            throw ParamError(path + ": expected header columns z0..z" + std::to_string(header.size() - 1) +
                             ", got '" + header[j] + "' at column " + std::to_string(j));
        }
    }
    const Index cols = static_cast<Index>(header.size());
    std::vector<Real> flat;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string row = strip_cr(line);
        if (row.empty()) continue;
        const std::vector<std::string> fields = split_commas(row);
        if (static_cast<Index>(fields.size()) != cols) {
            throw ParamError(path + ": line " + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                             " fields, got " + std::to_string(fields.size()));
        }
        for (const std::string& f : fields) flat.push_back(parse_real_field(f, path, lineno));
    }
    const Index rows = static_cast<Index>(flat.size()) / std::max<Index>(cols, 1);
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = flat[static_cast<std::size_t>(i * cols + j)];
    return m;
}

std::vector<int> load_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError("cannot read labels file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParamError(path + ": empty file");
    if (strip_cr(line) != "y") {
        throw ParamError(path + ": expected header 'y', got '" + strip_cr(line) + "'");
    }
    std::vector<int> labels;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string row = strip_cr(line);
        if (row.empty()) continue;
        try {
            std::size_t used = 0;
            const int v = std::stoi(row, &used);
            if (used != row.size()) throw std::invalid_argument("trailing characters");
            labels.push_back(v);
        } catch (const std::exception&) {
            throw ParamError(path + ": line " + std::to_string(lineno) + ": not an integer label: '" + row + "'");
        }
    }
    return labels;
}

void write_labels_csv(const std::vector<int>& labels, const std::string& path) {
    std::string text = "y\n";
    for (int y : labels) text += std::to_string(y) + "\n";
    write_text(path, text);
}

// Projects columns onto the two principal axes of the centered data. Signs
// are fixed so each axis has its largest-magnitude loading positive, keeping
// the projection deterministic.
Mat pca_two_axes(const Mat& z) {
    if (z.rows() == 0) return Mat::Zero(0, 2);
    if (z.cols() < 2) throw ParamError("principal-axis projection needs at least 2 columns");
    const Mat centered = z.rowwise() - z.colwise().mean();
    const Real denom = z.rows() > 1 ? static_cast<Real>(z.rows() - 1) : 1.0;
    const Mat cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
    if (solver.info() != Eigen::Success) throw StateError("principal-axis decomposition failed");
    const Mat vecs = solver.eigenvectors();  // eigenvalues ascending
    Mat proj(z.cols(), 2);
    proj.col(0) = vecs.col(vecs.cols() - 1);
    proj.col(1) = vecs.col(vecs.cols() - 2);
    for (int k = 0; k < 2; ++k) {
        Index imax = 0;
        proj.col(k).cwiseAbs().maxCoeff(&imax);
        if (proj(imax, k) < 0) proj.col(k) = -proj.col(k);
    }
    return centered * proj;
}

void print_eval_row(const MetricsRow& r) {
    std::cout << "iter " << r.iter << "  l_total " << fmt_short(r.l_total) << "  l_c " << fmt_short(r.l_c)
              << "  l_adv " << fmt_short(r.l_adv) << "  l_tl " << fmt_short(r.l_tl) << "  src_acc "
              << fmt_short(r.src_acc) << "  tgt_acc " << fmt_short(r.tgt_acc) << "\n";
}

int cmd_train(const std::string& config_path, const std::optional<std::string>& out_override,
              const std::optional<std::uint64_t>& seed_flag, bool quiet) {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (const auto es = env_seed()) cfg.train.seed = *es;
    if (seed_flag) cfg.train.seed = *seed_flag;
    if (out_override) cfg.out_dir = *out_override;
    cfg.train.validate();

    const DomainPair pair = cfg.dataset.generate();
    cfg.train.loss_weights(pair.num_classes);  // surface weight problems before training

    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/config_resolved.txt", resolved_config_text(cfg));
    save_domain_pair_csv(pair, cfg.out_dir + "/dataset.csv");
    write_labels_csv(pair.target_y, cfg.out_dir + "/target_labels.csv");

    EvalCallback on_eval;
    if (!quiet) on_eval = print_eval_row;
    ChattyModel model;
    const RunRecord record = run(pair, cfg.train, &model, on_eval);

    save_run_record(record, cfg.out_dir);
    save_checkpoint(model, cfg.out_dir + "/checkpoint.json");
    if (!quiet) std::cout << "wrote " << cfg.out_dir << "\n";
    return 0;
}

// Directory names for the per-config subruns: file stems, deduplicated by a
// numeric suffix so `a/run.cfg` and `b/run.cfg` stay distinct.
std::vector<std::string> run_names(const std::vector<std::string>& paths) {
    std::vector<std::string> names;
    std::map<std::string, int> seen;
    for (const std::string& p : paths) {
        std::string stem = std::filesystem::path(p).stem().string();
        if (stem.empty()) stem = "run";
        const int n = ++seen[stem];
        names.push_back(n == 1 ? stem : stem + "_" + std::to_string(n));
    }
    return names;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& out_dir,
                const std::optional<std::uint64_t>& seed_flag, bool quiet) {
    std::vector<ExperimentConfig> cfgs;
    cfgs.reserve(paths.size());
    for (const std::string& p : paths) cfgs.push_back(load_config(p));
    if (const auto es = env_seed()) {
        for (ExperimentConfig& c : cfgs) c.train.seed = *es;
    }
    if (seed_flag) {
        for (ExperimentConfig& c : cfgs) c.train.seed = *seed_flag;
    }

    // All runs must see the same data, otherwise their curves are not
    // comparable. A seed-only mismatch gets a pointed message since it is the
    // easiest way to get this wrong.
    for (std::size_t i = 1; i < cfgs.size(); ++i) {
        if (cfgs[i].dataset == cfgs[0].dataset) continue;
        DatasetConfig probe = cfgs[i].dataset;
        probe.seed = cfgs[0].dataset.seed;
        if (probe == cfgs[0].dataset) {
            throw ParamError("compare: dataset seeds differ (" + paths[0] + " uses " +
                             std::to_string(cfgs[0].dataset.seed) + ", " + paths[i] + " uses " +
                             std::to_string(cfgs[i].dataset.seed) + "); all configs must share one dataset");
        }
        throw ParamError("compare: dataset settings in " + paths[i] + " differ from " + paths[0] +
                         "; all configs must share one dataset");
    }
    for (const ExperimentConfig& c : cfgs) c.train.validate();

    const DomainPair pair = cfgs[0].dataset.generate();
    const std::vector<std::string> names = run_names(paths);
    std::filesystem::create_directories(out_dir);

    std::vector<RunRecord> records(cfgs.size());
    std::vector<std::exception_ptr> errors(cfgs.size());
    {
        std::vector<std::thread> workers;
        workers.reserve(cfgs.size());
        for (std::size_t i = 0; i < cfgs.size(); ++i) {
            workers.emplace_back([&, i] {
                try {
                    records[i] = run(pair, cfgs[i].train);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        }
        for (std::thread& w : workers) w.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::set<Index> all_iters;
    std::vector<std::map<Index, Real>> tgt_by_iter(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        save_run_record(records[i], out_dir + "/" + names[i]);
        write_text(out_dir + "/" + names[i] + "/config_resolved.txt", resolved_config_text(cfgs[i]));
        for (const MetricsRow& r : records[i].rows) {
            all_iters.insert(r.iter);
            tgt_by_iter[i][r.iter] = r.tgt_acc;
        }
    }

    std::string joined = "iter";
    for (const std::string& n : names) joined += "," + n;
    joined += "\n";
    for (Index it : all_iters) {
        joined += std::to_string(it);
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto found = tgt_by_iter[i].find(it);
            joined += ",";
            if (found != tgt_by_iter[i].end()) joined += fmt_full(found->second);
        }
        joined += "\n";
    }
    write_text(out_dir + "/comparison.csv", joined);

    std::vector<Series> curves;
    for (std::size_t i = 0; i < records.size(); ++i) {
        Series s;
        s.name = names[i];
        for (const MetricsRow& r : records[i].rows) {
            s.points.emplace_back(static_cast<Real>(r.iter), r.tgt_acc);
        }
        curves.push_back(std::move(s));
    }
    write_text(out_dir + "/compare.svg", curves_svg(curves, "target accuracy", "iteration", "accuracy"));

    if (!quiet) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            const MetricsRow& last = records[i].rows.back();
            std::cout << names[i] << ": final tgt_acc " << fmt_short(last.tgt_acc) << " at iter " << last.iter
                      << "\n";
        }
        std::cout << "wrote " << out_dir << "\n";
    }
    return 0;
}

int cmd_scatter(const std::string& snapshot_path, const std::string& labels_path,
                const std::optional<std::string>& out_override, bool use_pca,
                const std::optional<std::string>& title_override) {
    const Mat z = load_snapshot_csv(snapshot_path);
    const std::vector<int> labels = load_labels_csv(labels_path);
    if (static_cast<Index>(labels.size()) != z.rows()) {
        throw ParamError("scatter: snapshot has " + std::to_string(z.rows()) + " rows but labels file has " +
                         std::to_string(labels.size()));
    }
    if (z.cols() < 2) {
        throw ParamError("scatter: snapshot needs at least 2 logit columns, got " + std::to_string(z.cols()));
    }

    Mat points;
    if (z.cols() == 2 && !use_pca) {
        points = z;
    } else if (z.cols() <= 3 || use_pca) {
        points = pca_two_axes(z);
    } else {
        throw ParamError("scatter: snapshot has " + std::to_string(z.cols()) +
                         " columns; pass --pca to project onto the two principal axes");
    }

    const std::string title =
        title_override ? *title_override : std::filesystem::path(snapshot_path).stem().string();
    std::string out_path;
    if (out_override) {
        out_path = *out_override;
    } else {
        std::filesystem::path p(snapshot_path);
        p.replace_extension(".svg");
        out_path = p.string();
    }
    write_text(out_path, scatter_svg(points, labels, title));
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_verify() {
    const std::vector<VerifyResult> results = run_verification(1234);
    int failed = 0;
    for (const VerifyResult& r : results) {
        if (r.pass) {
            std::cout << "PASS " << r.name << "\n";
        } else {
            ++failed;
            std::cout << "FAIL " << r.name;
            if (!r.detail.empty()) std::cout << ": " << r.detail;
            std::cout << "\n";
        }
    }
    std::cout << (results.size() - failed) << "/" << results.size() << " checks passed\n";
    return failed == 0 ? 0 : 1;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"domain-adaptation trainer with dual transport heads"};
    app.require_subcommand(1);

    CLI::App* train_cmd = app.add_subcommand("train", "train one model from a config file");
    std::string train_config;
    train_cmd->add_option("config", train_config, "experiment config (key=value lines); omit to use defaults");
    std::string train_out;
    CLI::Option* train_out_opt = train_cmd->add_option("--out", train_out, "output directory (overrides out_dir)");
    std::uint64_t train_seed = 0;
    CLI::Option* train_seed_opt =
        train_cmd->add_option("--seed", train_seed, "training seed (overrides CHATTY_SEED and the config)");
    bool train_quiet = false;
    train_cmd->add_flag("--quiet", train_quiet, "suppress progress output");

    CLI::App* compare_cmd = app.add_subcommand("compare", "train several configs on one shared dataset");
    std::vector<std::string> compare_configs;
    compare_cmd->add_option("configs", compare_configs, "2-4 experiment configs sharing a dataset block")
        ->expected(2, 4);
    std::string compare_out = "compare_out";
    compare_cmd->add_option("--out", compare_out, "output directory (default compare_out)");
    std::uint64_t compare_seed = 0;
    CLI::Option* compare_seed_opt =
        compare_cmd->add_option("--seed", compare_seed, "training seed applied to every config");
    bool compare_quiet = false;
    compare_cmd->add_flag("--quiet", compare_quiet, "suppress progress output");

    CLI::App* scatter_cmd = app.add_subcommand("scatter", "render a logit snapshot as a labeled 2-D scatter");
    std::string scatter_snapshot;
    scatter_cmd->add_option("snapshot", scatter_snapshot, "snapshot CSV (z0..z{c-1} header)")->required();
    std::string scatter_labels;
    scatter_cmd->add_option("labels", scatter_labels, "labels CSV ('y' header)")->required();
    std::string scatter_out;
    CLI::Option* scatter_out_opt =
        scatter_cmd->add_option("--out", scatter_out, "output SVG path (default: snapshot path with .svg)");
    bool scatter_pca = false;
    scatter_cmd->add_flag("--pca", scatter_pca, "project onto the two principal axes");
    std::string scatter_title;
    CLI::Option* scatter_title_opt = scatter_cmd->add_option("--title", scatter_title, "plot title");

    CLI::App* verify_cmd = app.add_subcommand("verify", "run the gradient/equivalence verification suite");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(train_cmd)) {
            return cmd_train(train_config,
                             train_out_opt->count() ? std::optional<std::string>(train_out) : std::nullopt,
                             train_seed_opt->count() ? std::optional<std::uint64_t>(train_seed) : std::nullopt,
                             train_quiet);
        }
        if (app.got_subcommand(compare_cmd)) {
            return cmd_compare(compare_configs, compare_out,
                               compare_seed_opt->count() ? std::optional<std::uint64_t>(compare_seed)
                                                         : std::nullopt,
                               compare_quiet);
        }
        if (app.got_subcommand(scatter_cmd)) {
            return cmd_scatter(scatter_snapshot, scatter_labels,
                               scatter_out_opt->count() ? std::optional<std::string>(scatter_out) : std::nullopt,
                               scatter_pca,
                               scatter_title_opt->count() ? std::optional<std::string>(scatter_title)
                                                          : std::nullopt);
        }
        if (app.got_subcommand(verify_cmd)) {
            return cmd_verify();
        }
    } catch (const NanAbort& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IndexError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace chatty
