#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pbshm::svg {

struct Series {
  std::string name;
  Eigen::MatrixXd X;        // rows are samples
  std::vector<int> labels;  // colour index per row
  bool hollow = false;      // open markers, e.g. for mapped target points
};

/// Two-feature scatter (columns dim_x, dim_y), coloured by label, one marker
/// style per series.
std::string scatter(const std::vector<Series>& series, const std::vector<std::string>& label_names,
                    const std::string& title, std::size_t dim_x = 0, std::size_t dim_y = 1);

}  // namespace pbshm::svg
