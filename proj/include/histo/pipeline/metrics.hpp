#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace histo::pipeline {

/// One-vs-rest quality summary. Confusion rows are ground truth, columns
/// are predictions. A class with no positives (or no negatives) reports
/// the vacuous rate 1.
struct Metrics {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;
  std::vector<double> sensitivity;
  std::vector<double> specificity;
};

Metrics evaluate(std::span<const int> predicted, std::span<const int> truth,
                 int num_classes);

/// Structured text: "accuracy <v>" then one "name <n> sensitivity <v>
/// specificity <v>" line per class.
std::string format_metrics(const Metrics& metrics,
                           const std::vector<std::string>& class_names);

/// Maps source classes onto contiguous grouped classes; sources listed in
/// `unmatched` take no part in grouped evaluation.
struct ClassMapping {
  std::vector<std::string> group_names;
  std::vector<std::vector<int>> group_members;
  std::vector<int> unmatched;

  int num_groups() const { return static_cast<int>(group_names.size()); }
  void validate(int num_source_classes) const;
  /// Identity: every source class becomes its own group.
  static ClassMapping identity(const std::vector<std::string>& class_names);
};

/// Mapping file format, one group per line:
///   grouped_name = member, member, ...
///   unmatched = member, ...
ClassMapping parse_class_mapping(const std::string& text,
                                 const std::vector<std::string>& class_names);

struct GroupedSamples {
  Eigen::MatrixXd probabilities;  // rows: kept samples, cols: groups
  std::vector<int> labels;        // grouped truth for kept samples
};

/// Sum member-class probabilities into group probabilities (renormalized
/// over the mapped mass when classes are unmatched) and regroup labels.
/// Samples whose true class is unmatched are dropped.
GroupedSamples group_classes(const Eigen::MatrixXd& probabilities,
                             std::span<const int> labels,
                             const ClassMapping& mapping);

}  // namespace histo::pipeline
