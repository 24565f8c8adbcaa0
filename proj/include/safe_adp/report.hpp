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
#ifndef SAFE_ADP_REPORT_HPP
#define SAFE_ADP_REPORT_HPP

#include <string>
#include <vector>

#include "safe_adp/experiment.hpp"

namespace safe_adp {

/// Minimal line-plot renderer producing standalone SVG documents.
class SvgPlot {
public:
    SvgPlot(std::string title, std::string x_label, std::string y_label, bool log_y = false);

    void add_series(std::vector<double> x, std::vector<double> y, std::string color, std::string label = "",
                    bool dashed = false);
    void add_hline(double y, std::string color, std::string label = "");
    void add_vline(double x, std::string color, std::string label = "");
    /// Same data scale on both axes (used for phase portraits).
    void set_equal_aspect(bool on) { equal_aspect_ = on; }

    std::string render(int width = 720, int height = 460) const;

private:
    struct Series {
        std::vector<double> x;
        std::vector<double> y;
        std::string color;
        std::string label;
        bool dashed;
    };
    struct Line {
        double v;
        std::string color;
        std::string label;
    };
    std::string title_;
    std::string x_label_;
    std::string y_label_;
    bool log_y_;
    bool equal_aspect_ = false;
    std::vector<Series> series_;
    std::vector<Line> hlines_;
    std::vector<Line> vlines_;
};

/// Boundary of the projection of {x : x^T P x <= rho} onto coordinates (i, j),
/// sampled at `points` angles.
std::vector<std::pair<double, double>> ellipse_boundary(const Ellipsoid& e, Eigen::Index i, Eigen::Index j,
                                                        int points = 256);

std::string trajectory_csv(const EpisodeLog& log);
io::Json episode_json(const ExperimentConfig& cfg, const PreparedEpisode& prep, const EpisodeLog& log);
io::Json batch_report_json(const ExperimentConfig& cfg, const BatchReport& report);

std::string ellipsoids_svg(const EpisodeLog& log, const ConstraintSet& cs);
std::string states_svg(const EpisodeLog& log, const ConstraintSet& cs);
std::string inputs_svg(const EpisodeLog& log, const ConstraintSet& cs);
std::string policy_error_svg(const EpisodeLog& log);
std::string batch_policy_error_svg(const BatchReport& report, double tolerance);

/// Writes trajectory.csv, episode.json and the SVG panels into `dir`.
void write_episode_outputs(const std::string& dir, const ExperimentConfig& cfg, const PreparedEpisode& prep,
                           const EpisodeLog& log);

}  // namespace safe_adp

#endif  // SAFE_ADP_REPORT_HPP
