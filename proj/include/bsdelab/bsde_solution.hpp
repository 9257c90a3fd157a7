#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bsdelab {

// Discrete (Y, Z) fields on the grid per path, plus regression metadata.
struct BsdeSolution {
    Eigen::MatrixXd Y;              // n_paths x (K+1)
    std::vector<Eigen::MatrixXd> Z; // K entries, each n_paths x m
    std::string basis_id;
    std::vector<int> picard_iters;  // max inner iterations per backward step
    int clip_events = 0;            // paths hit by the Z truncation radius
    double max_condition = 0.0;     // worst normal-equation condition seen
};

} // namespace bsdelab
