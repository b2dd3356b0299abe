#include "histo/pipeline/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "histo/errors.hpp"

namespace histo::pipeline {

Metrics evaluate(std::span<const int> predicted, std::span<const int> truth,
                 int num_classes) {
  if (predicted.size() != truth.size())
    fail(ErrorCode::LengthMismatch,
         "evaluate: prediction/truth lengths differ");
  if (predicted.empty()) fail(ErrorCode::EmptyInput, "evaluate: no samples");
  if (num_classes < 1)
    fail(ErrorCode::InvalidArgument, "evaluate: bad class count");

  Metrics m;
  m.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      fail(ErrorCode::InvalidArgument, "evaluate: label out of range");
    m.confusion(t, p) += 1;
    if (t == p) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / truth.size();

  const long total = static_cast<long>(truth.size());
  m.sensitivity.resize(num_classes);
  m.specificity.resize(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const long tp = m.confusion(c, c);
    const long fn = m.confusion.row(c).sum() - tp;
    const long fp = m.confusion.col(c).sum() - tp;
    const long tn = total - tp - fn - fp;
    m.sensitivity[c] = (tp + fn) == 0 ? 1.0 : double(tp) / double(tp + fn);
    m.specificity[c] = (tn + fp) == 0 ? 1.0 : double(tn) / double(tn + fp);
  }
  return m;
}

std::string format_metrics(const Metrics& metrics,
                           const std::vector<std::string>& class_names) {
  char buf[160];
  std::ostringstream os;
  std::snprintf(buf, sizeof(buf), "accuracy %.6f\n", metrics.accuracy);
  os << buf;
  for (std::size_t c = 0; c < metrics.sensitivity.size(); ++c) {
    const std::string name =
        c < class_names.size() ? class_names[c] : "class" + std::to_string(c);
    std::snprintf(buf, sizeof(buf),
                  "name %s sensitivity %.6f specificity %.6f\n", name.c_str(),
                  metrics.sensitivity[c], metrics.specificity[c]);
    os << buf;
  }
  return os.str();
}

void ClassMapping::validate(int num_source_classes) const {
  if (group_names.size() != group_members.size())
    fail(ErrorCode::InvalidArgument, "mapping: name/member size mismatch");
  std::vector<int> seen(num_source_classes, 0);
  for (const auto& members : group_members)
    for (int s : members) {
      if (s < 0 || s >= num_source_classes)
        fail(ErrorCode::InvalidArgument, "mapping: source index out of range");
      seen[s] += 1;
    }
  for (int s : unmatched) {
    if (s < 0 || s >= num_source_classes)
      fail(ErrorCode::InvalidArgument, "mapping: source index out of range");
    seen[s] += 1;
  }
  for (int s = 0; s < num_source_classes; ++s) {
    if (seen[s] == 0)
      fail(ErrorCode::UnmappedClass,
           "mapping: source class " + std::to_string(s) +
               " is neither grouped nor listed unmatched");
    if (seen[s] > 1)
      fail(ErrorCode::InvalidArgument,
           "mapping: source class " + std::to_string(s) +
               " appears more than once");
  }
}

ClassMapping ClassMapping::identity(
    const std::vector<std::string>& class_names) {
  ClassMapping m;
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    m.group_names.push_back(class_names[i]);
    m.group_members.push_back({static_cast<int>(i)});
  }
  return m;
}

ClassMapping parse_class_mapping(const std::string& text,
                                 const std::vector<std::string>& class_names) {
  auto class_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < class_names.size(); ++i)
      if (class_names[i] == name) return static_cast<int>(i);
    fail(ErrorCode::UnmappedClass,
         "mapping references unknown class '" + name + "'");
  };
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
  };

  ClassMapping mapping;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::MalformedLine,
           "mapping line " + std::to_string(lineno) + ": missing '='");
    const std::string name = trim(line.substr(0, eq));
    if (name.empty())
      fail(ErrorCode::MalformedLine,
           "mapping line " + std::to_string(lineno) + ": empty group name");
    std::vector<int> members;
    std::string rest = line.substr(eq + 1);
    std::istringstream ms(rest);
    std::string member;
    while (std::getline(ms, member, ',')) {
      member = trim(member);
      if (member.empty())
        fail(ErrorCode::MalformedLine,
             "mapping line " + std::to_string(lineno) + ": empty member");
      members.push_back(class_index(member));
    }
    if (members.empty())
      fail(ErrorCode::MalformedLine,
           "mapping line " + std::to_string(lineno) + ": no members");
    if (name == "unmatched") {
      mapping.unmatched.insert(mapping.unmatched.end(), members.begin(),
                               members.end());
    } else {
      mapping.group_names.push_back(name);
      mapping.group_members.push_back(std::move(members));
    }
  }
  mapping.validate(static_cast<int>(class_names.size()));
  return mapping;
}

GroupedSamples group_classes(const Eigen::MatrixXd& probabilities,
                             std::span<const int> labels,
                             const ClassMapping& mapping) {
  const int k = static_cast<int>(probabilities.cols());
  mapping.validate(k);
  if (static_cast<std::size_t>(probabilities.rows()) != labels.size())
    fail(ErrorCode::LengthMismatch, "grouping: probabilities/labels differ");

  std::vector<int> source_to_group(k, -1);
  for (std::size_t g = 0; g < mapping.group_members.size(); ++g)
    for (int s : mapping.group_members[g])
      source_to_group[s] = static_cast<int>(g);

  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k)
      fail(ErrorCode::InvalidArgument, "grouping: label out of range");
    if (source_to_group[labels[i]] >= 0)
      keep.push_back(static_cast<Eigen::Index>(i));
  }

  GroupedSamples out;
  const int groups = mapping.num_groups();
  out.probabilities.resize(static_cast<Eigen::Index>(keep.size()), groups);
  out.labels.reserve(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const Eigen::Index i = keep[r];
    for (int g = 0; g < groups; ++g) {
      double sum = 0;
      for (int s : mapping.group_members[g]) sum += probabilities(i, s);
      out.probabilities(static_cast<Eigen::Index>(r), g) = sum;
    }
    // Mass on unmatched classes leaves the event space; renormalize over
    // what remains. With nothing unmatched the rows pass through exactly.
    if (!mapping.unmatched.empty()) {
      const double mass = out.probabilities.row(r).sum();
      if (mass > 1e-12)
        out.probabilities.row(r) /= mass;
      else
        out.probabilities.row(r).setConstant(1.0 / groups);
    }
    out.labels.push_back(source_to_group[labels[i]]);
  }
  return out;
}

}  // namespace histo::pipeline
