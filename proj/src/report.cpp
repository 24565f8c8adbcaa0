/*
 Copyright 2026 The safe_adp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "safe_adp/report.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>

namespace safe_adp {

namespace {

std::string fmt(double v, const char* spec = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

// Bound of a box-type row: returns (coordinate, signed bound) when the row
// constrains a single component of x (or u) only.
bool single_component(const Vector& a, const Vector& other, Eigen::Index& idx, double& bound) {
    if (other.size() > 0 && other.cwiseAbs().maxCoeff() > 0.0) return false;
    Eigen::Index nz = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) != 0.0) {
            ++nz;
            idx = i;
        }
    if (nz != 1) return false;
    bound = 1.0 / a(idx);
    return true;
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label, bool log_y)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)), log_y_(log_y) {}

void SvgPlot::add_series(std::vector<double> x, std::vector<double> y, std::string color, std::string label,
                         bool dashed) {
    series_.push_back({std::move(x), std::move(y), std::move(color), std::move(label), dashed});
}

void SvgPlot::add_hline(double y, std::string color, std::string label) {
    hlines_.push_back({y, std::move(color), std::move(label)});
}

void SvgPlot::add_vline(double x, std::string color, std::string label) {
    vlines_.push_back({x, std::move(color), std::move(label)});
}

std::string SvgPlot::render(int width, int height) const {
    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = width - left - right;
    const double ph = height - top - bottom;
    auto ty = [&](double y) { return log_y_ ? std::log10(y) : y; };
    auto usable = [&](double y) { return std::isfinite(y) && (!log_y_ || y > 0.0); };

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series_)
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if (!std::isfinite(s.x[k]) || !usable(s.y[k])) continue;
            xmin = std::min(xmin, s.x[k]);
            xmax = std::max(xmax, s.x[k]);
            ymin = std::min(ymin, ty(s.y[k]));
            ymax = std::max(ymax, ty(s.y[k]));
        }
    for (const auto& h : hlines_)
        if (usable(h.v)) {
            ymin = std::min(ymin, ty(h.v));
            ymax = std::max(ymax, ty(h.v));
        }
    for (const auto& v : vlines_)
        if (std::isfinite(v.v)) {
            xmin = std::min(xmin, v.v);
            xmax = std::max(xmax, v.v);
        }
    if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0;
    if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
    if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
    if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
    const double padx = 0.04 * (xmax - xmin), pady = 0.06 * (ymax - ymin);
    xmin -= padx, xmax += padx, ymin -= pady, ymax += pady;
    if (equal_aspect_) {
        const double sx = (xmax - xmin) / pw, sy = (ymax - ymin) / ph;
        if (sx > sy) {
            const double c = 0.5 * (ymin + ymax), h = 0.5 * sx * ph;
            ymin = c - h, ymax = c + h;
        } else {
            const double c = 0.5 * (xmin + xmax), h = 0.5 * sy * pw;
            xmin = c - h, xmax = c + h;
        }
    }
    auto X = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto Y = [&](double y) { return top + (1.0 - (ty(y) - ymin) / (ymax - ymin)) * ph; };
    auto Yt = [&](double yt) { return top + (1.0 - (yt - ymin) / (ymax - ymin)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title_)
       << "</text>\n";
    os << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Ticks.
    for (int k = 0; k <= 5; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 5.0;
        os << "<line x1=\"" << fmt(X(xv)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(X(xv)) << "\" y2=\""
           << fmt(top + ph + 5) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fmt(X(xv)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
           << fmt(xv, "%.3g") << "</text>\n";
    }
    if (log_y_) {
        for (int d = static_cast<int>(std::ceil(ymin)); d <= static_cast<int>(std::floor(ymax)); ++d) {
            os << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(Yt(d)) << "\" x2=\"" << fmt(left + pw)
               << "\" y2=\"" << fmt(Yt(d)) << "\" stroke=\"#dddddd\"/>\n";
            os << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(Yt(d) + 4) << "\" text-anchor=\"end\">1e" << d
               << "</text>\n";
        }
    } else {
        for (int k = 0; k <= 5; ++k) {
            const double yv = ymin + (ymax - ymin) * k / 5.0;
            os << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(Yt(yv)) << "\" x2=\"" << fmt(left)
               << "\" y2=\"" << fmt(Yt(yv)) << "\" stroke=\"black\"/>\n";
            os << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(Yt(yv) + 4) << "\" text-anchor=\"end\">"
               << fmt(yv, "%.3g") << "</text>\n";
        }
    }
    os << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
       << escape(x_label_) << "</text>\n";
    os << "<text x=\"16\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << fmt(top + ph / 2) << ")\">" << escape(y_label_) << "</text>\n";

    os << "<clipPath id=\"plot\"><rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw)
       << "\" height=\"" << fmt(ph) << "\"/></clipPath>\n<g clip-path=\"url(#plot)\">\n";
    for (const auto& h : hlines_) {
        if (!usable(h.v)) continue;
        os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(Y(h.v)) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
           << fmt(Y(h.v)) << "\" stroke=\"" << h.color << "\" stroke-dasharray=\"6 4\"/>\n";
    }
    for (const auto& v : vlines_) {
        os << "<line x1=\"" << fmt(X(v.v)) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(X(v.v)) << "\" y2=\""
           << fmt(top + ph) << "\" stroke=\"" << v.color << "\" stroke-dasharray=\"6 4\"/>\n";
    }
    for (const auto& s : series_) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
        if (s.dashed) os << " stroke-dasharray=\"4 3\"";
        os << " points=\"";
        bool first = true;
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if (!std::isfinite(s.x[k]) || !usable(s.y[k])) continue;
            if (!first) os << ' ';
            os << fmt(X(s.x[k])) << ',' << fmt(Y(s.y[k]));
            first = false;
        }
        os << "\"/>\n";
    }
    os << "</g>\n";

    int row = 0;
    for (const auto& s : series_) {
        if (s.label.empty()) continue;
        const double ly = top + 14 + 16 * row++;
        os << "<line x1=\"" << fmt(left + pw - 150) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(left + pw - 128)
           << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << fmt(left + pw - 122) << "\" y=\"" << fmt(ly) << "\">" << escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<std::pair<double, double>> ellipse_boundary(const Ellipsoid& e, Eigen::Index i, Eigen::Index j,
                                                        int points) {
    // The projection of {x' P x <= rho} is {y' S^{-1} y <= rho} with S the
    // (i, j) block of P^{-1}.
    const Matrix Pinv = e.P.llt().solve(Matrix::Identity(e.n(), e.n()));
    Matrix S(2, 2);
    S << Pinv(i, i), Pinv(i, j), Pinv(j, i), Pinv(j, j);
    const Matrix L = Eigen::LLT<Matrix>(S).matrixL();
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(points) + 1);
    const double r = std::sqrt(e.rho);
    for (int k = 0; k <= points; ++k) {
        const double th = 2.0 * std::numbers::pi * k / points;
        Eigen::Vector2d c(std::cos(th), std::sin(th));
        const Eigen::Vector2d y = r * (L * c);
        out.emplace_back(y(0), y(1));
    }
    return out;
}

std::string trajectory_csv(const EpisodeLog& log) {
    std::ostringstream os;
    const Eigen::Index n = log.steps.empty() ? 0 : log.steps.front().x.size();
    const Eigen::Index m = log.steps.empty() ? 0 : log.steps.front().u.size();
    os << "t";
    for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i + 1;
    for (Eigen::Index i = 0; i < m; ++i) os << ",u" << i + 1;
    for (Eigen::Index i = 0; i < m; ++i) os << ",nu" << i + 1;
    os << ",policy_error,ellipsoid_id,value,rho,max_violation,gated\n";
    for (const StepRecord& s : log.steps) {
        os << s.t;
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << io::format_double(s.x(i));
        for (Eigen::Index i = 0; i < m; ++i) os << ',' << io::format_double(s.u(i));
        for (Eigen::Index i = 0; i < m; ++i) os << ',' << io::format_double(s.nu(i));
        os << ',' << io::format_double(s.policy_error) << ',' << s.ellipsoid_id << ',' << io::format_double(s.value)
           << ',' << io::format_double(log.ellipsoids.at(static_cast<std::size_t>(s.ellipsoid_id)).rho) << ','
           << io::format_double(s.max_violation) << ',' << (s.gated ? 1 : 0) << '\n';
    }
    return os.str();
}

io::Json episode_json(const ExperimentConfig& cfg, const PreparedEpisode& prep, const EpisodeLog& log) {
    using io::Json;
    const EpisodeSpec& spec = prep.spec;
    Json j = Json::object();
    j["name"] = cfg.name;
    j["mode"] = spec.mode == EvaluationMode::data_driven ? "data-driven" : "model-based";
    j["seed"] = cfg.seed;
    j["horizon"] = spec.horizon;
    j["system"] = io::system_to_json(spec.sys);
    j["cost"] = io::cost_to_json(spec.cost);
    j["constraints"] = io::constraints_to_json(spec.constraints);
    j["design_constraints"] = io::constraints_to_json(spec.design_constraints);
    j["lqr"] = io::lqr_to_json(prep.lqr);

    Json init = Json::object();
    init["K0"] = io::matrix_to_json(spec.K0);
    init["x0"] = io::vector_to_json(spec.x0);
    init["ellipsoid"] = io::ellipsoid_to_json(spec.cais0);
    j["initial"] = std::move(init);

    Json adp = Json::object();
    adp["N"] = spec.schedule.N;
    adp["p_min"] = spec.cfg.p_min;
    adp["p_max"] = spec.cfg.p_max;
    adp["box_rule"] = prep.box_rule;
    adp["lambda"] = spec.cfg.lambda;
    adp["lambda_bound"] = prep.lambda_bound;
    adp["lambda_floor"] = prep.lambda_floor;
    adp["convergence_window"] = prep.convergence_window;
    adp["box_literal"] = prep.box.literal;
    adp["box_spectral"] = prep.box.spectral;
    adp["rho_weight"] = spec.cfg.rho_weight;
    adp["beta"] = spec.cfg.beta;
    adp["epsilon"] = spec.cfg.epsilon;
    adp["gate"] = spec.cfg.gate == GateMode::relative ? "relative" : "absolute";
    adp["hessian_init_scale"] = spec.cfg.hessian_init_scale;
    adp["step_size"] = spec.cfg.step_size;
    adp["lookahead_guard"] = spec.cfg.lookahead_guard;
    adp["noise_amplitude"] = spec.noise.amplitude;
    j["adp"] = std::move(adp);

    Json ells = Json::array();
    for (std::size_t i = 0; i < log.ellipsoids.size(); ++i) {
        Json e = io::ellipsoid_to_json(log.ellipsoids[i]);
        e["id"] = i;
        e["t"] = i == 0 ? 0L : log.learning_instants.at(i - 1);
        ells.push_back(std::move(e));
    }
    j["ellipsoids"] = std::move(ells);
    j["learning_instants"] = log.learning_instants;

    Json events = Json::array();
    for (const LearningEvent& ev : log.events) {
        Json e = Json::object();
        e["t"] = ev.t;
        e["samples"] = ev.samples;
        e["pe_passed"] = ev.pe_passed;
        e["success"] = ev.success;
        e["status"] = ev.status;
        e["sdp_iterations"] = ev.sdp_iterations;
        e["ellipsoid_id"] = ev.ellipsoid_id;
        events.push_back(std::move(e));
    }
    j["events"] = std::move(events);

    const RunRecord rec = summarize_run(cfg, prep, log);
    const DecreaseReport t1 = check_value_decrease(log, spec.sys, spec.cfg);
    Json summary = Json::object();
    summary["steps"] = log.steps.size();
    summary["converged"] = rec.converged;
    summary["convergence_time"] = rec.convergence_time;
    summary["convergence_tolerance"] = cfg.convergence_tol;
    summary["final_policy_error"] = rec.final_policy_error;
    summary["max_violation"] = log.max_violation;
    summary["ellipsoid_exits"] = log.ellipsoid_exits;
    summary["contraction_violations"] = log.contraction_violations;
    summary["hessian_resets"] = log.hessian_resets;
    if (!log.steps.empty()) {
        summary["x_final"] = io::vector_to_json(log.x_final);
        summary["K_final"] = io::matrix_to_json(log.K_final);
    }
    Json th = Json::object();
    th["ok"] = t1.ok();
    th["states_checked"] = t1.states_checked;
    th["states_outside"] = t1.states_outside;
    th["cycles_checked"] = t1.cycles_checked;
    th["decrease_checks"] = t1.decrease_checks;
    th["decrease_failures"] = t1.decrease_failures;
    th["worst_ratio"] = t1.worst_ratio;
    summary["value_decrease"] = std::move(th);
    j["summary"] = std::move(summary);
    j["warnings"] = prep.warnings;
    j["config"] = cfg.source;
    return j;
}

io::Json batch_report_json(const ExperimentConfig& cfg, const BatchReport& report) {
    using io::Json;
    Json j = Json::object();
    j["name"] = cfg.name;
    j["count"] = report.runs.size();
    j["first_seed"] = cfg.seed;
    j["convergence_tolerance"] = cfg.convergence_tol;
    j["convergence_limit"] = static_cast<long>(cfg.convergence_windows) * cfg.N;
    j["fraction_converged"] = report.fraction_converged;
    j["median_convergence_time"] = report.median_convergence_time;
    j["all_safe"] = report.all_safe;
    Json runs = Json::array();
    for (const RunRecord& r : report.runs) {
        Json e = Json::object();
        e["seed"] = r.seed;
        e["converged"] = r.converged;
        e["convergence_time"] = r.convergence_time;
        e["max_violation"] = r.max_violation;
        e["final_policy_error"] = r.final_policy_error;
        e["learning_cycles"] = r.learning_cycles;
        e["ellipsoid_exits"] = r.ellipsoid_exits;
        e["decrease_ok"] = r.decrease_ok;
        e["safe"] = r.safe;
        if (!r.error.empty()) e["error"] = r.error;
        runs.push_back(std::move(e));
    }
    j["runs"] = std::move(runs);
    j["config"] = cfg.source;
    return j;
}

std::string ellipsoids_svg(const EpisodeLog& log, const ConstraintSet& cs) {
    SvgPlot plot("Invariant ellipsoids and state trajectory", "x1", "x2");
    plot.set_equal_aspect(true);
    if (log.ellipsoids.empty() || log.ellipsoids.front().n() < 2) return plot.render();
    for (std::size_t k = 0; k < log.ellipsoids.size(); ++k) {
        const auto pts = ellipse_boundary(log.ellipsoids[k], 0, 1);
        std::vector<double> x, y;
        for (const auto& [a, b] : pts) {
            x.push_back(a);
            y.push_back(b);
        }
        plot.add_series(std::move(x), std::move(y), k == 0 ? "#7f7f7f" : color(k),
                        k == 0 ? "initial set" : (k + 1 == log.ellipsoids.size() ? "final set" : ""), k == 0);
    }
    std::vector<double> x, y;
    for (const StepRecord& s : log.steps) {
        x.push_back(s.x(0));
        y.push_back(s.x(1));
    }
    if (!log.steps.empty()) {
        x.push_back(log.x_final(0));
        y.push_back(log.x_final(1));
    }
    plot.add_series(std::move(x), std::move(y), "black", "trajectory");
    for (const auto& r : cs.rows()) {
        Eigen::Index idx = 0;
        double b = 0.0;
        if (!single_component(r.c, r.d, idx, b)) continue;
        if (idx == 0) plot.add_vline(b, "#d62728");
        if (idx == 1) plot.add_hline(b, "#d62728");
    }
    return plot.render();
}

namespace {

std::string trace_svg(const EpisodeLog& log, const ConstraintSet& cs, bool inputs) {
    SvgPlot plot(inputs ? "Inputs" : "States", "t", inputs ? "u" : "x");
    if (log.steps.empty()) return plot.render();
    const Eigen::Index dim = inputs ? log.steps.front().u.size() : log.steps.front().x.size();
    for (Eigen::Index i = 0; i < dim; ++i) {
        std::vector<double> t, v;
        for (const StepRecord& s : log.steps) {
            t.push_back(static_cast<double>(s.t));
            v.push_back(inputs ? s.u(i) : s.x(i));
        }
        plot.add_series(std::move(t), std::move(v), color(static_cast<std::size_t>(i)),
                        (inputs ? "u" : "x") + std::to_string(i + 1));
    }
    for (const auto& r : cs.rows()) {
        Eigen::Index idx = 0;
        double b = 0.0;
        const bool ok = inputs ? single_component(r.d, r.c, idx, b) : single_component(r.c, r.d, idx, b);
        if (ok) plot.add_hline(b, "#d62728");
    }
    return plot.render();
}

}  // namespace

std::string states_svg(const EpisodeLog& log, const ConstraintSet& cs) { return trace_svg(log, cs, false); }
std::string inputs_svg(const EpisodeLog& log, const ConstraintSet& cs) { return trace_svg(log, cs, true); }

std::string policy_error_svg(const EpisodeLog& log) {
    SvgPlot plot("Policy error against the LQR gain", "t", "||K - K_lqr||", true);
    std::vector<double> t, e;
    for (const StepRecord& s : log.steps) {
        t.push_back(static_cast<double>(s.t));
        e.push_back(s.policy_error);
    }
    plot.add_series(std::move(t), std::move(e), "#1f77b4", "policy error");
    for (long ti : log.learning_instants) plot.add_vline(static_cast<double>(ti), "#bbbbbb");
    return plot.render();
}

std::string batch_policy_error_svg(const BatchReport& report, double tolerance) {
    SvgPlot plot("Policy error over the batch", "t", "||K - K_lqr||", true);
    for (std::size_t k = 0; k < report.runs.size(); ++k) {
        const auto& r = report.runs[k];
        std::vector<double> t(r.policy_error.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
        plot.add_series(std::move(t), r.policy_error, color(k));
    }
    plot.add_hline(tolerance, "black", "tolerance");
    return plot.render();
}

void write_episode_outputs(const std::string& dir, const ExperimentConfig& cfg, const PreparedEpisode& prep,
                           const EpisodeLog& log) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path d(dir);
    io::write_text_file((d / "trajectory.csv").string(), trajectory_csv(log));
    io::write_text_file((d / "episode.json").string(), episode_json(cfg, prep, log).dump(2) + "\n");
    io::write_text_file((d / "ellipsoids.svg").string(), ellipsoids_svg(log, prep.spec.constraints));
    io::write_text_file((d / "states.svg").string(), states_svg(log, prep.spec.constraints));
    io::write_text_file((d / "inputs.svg").string(), inputs_svg(log, prep.spec.constraints));
    io::write_text_file((d / "policy_error.svg").string(), policy_error_svg(log));
}

}  // namespace safe_adp
