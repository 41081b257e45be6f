#pragma once

#include <string>
#include <vector>

#include "bexrl/seg/labels.hpp"

namespace bexrl::pipeline {

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

// Line plot with markers, shared axes, axis labels and a legend.
std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);

// One row per episode, one colored <rect> per timestep.
std::string label_strips(const seg::EpisodeLabels& labels, const std::string& title);

}  // namespace bexrl::pipeline
