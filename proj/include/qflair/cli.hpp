#pragma once

#include <string>
#include <utility>

#include "qflair/data.hpp"

namespace qflair::cli {

// Entry point for the qflair tool. Maps errors to exit codes:
// 1 = configuration error, 2 = data error, 3 = training failure.
int run(int argc, const char* const* argv) noexcept;

// Resolves --data arguments: a directory produced by gen-data (train.csv /
// test.csv) or a named MNIST variant (mnist01, mnist35, mnist7x7,
// mnist14x14, mnist28x28, mnistpca) loaded from IDX files in mnist_dir.
std::pair<Dataset, Dataset> resolve_dataset(const std::string& name_or_path,
                                            const std::string& mnist_dir,
                                            std::size_t train_n, std::size_t test_n);

}  // namespace qflair::cli
