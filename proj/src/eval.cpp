/*
 * Copyright 2026 The Spyglass Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "spyglass/eval.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <json.hpp>
#include <ostream>
#include <set>
#include <sstream>

namespace spyglass {

namespace {

double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

}  // namespace

Metrics metrics_from_confusion(const Confusion& c) {
  Metrics m;
  m.confusion = c;
  m.accuracy = ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
  m.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  m.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  m.f1 = ratio(2 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

const DomainReport* EvalReport::find(const std::string& domain) const {
  for (const DomainReport& d : domains) {
    if (d.domain == domain) return &d;
  }
  return nullptr;
}

EvalReport evaluate_predictions(std::span<const double> probabilities, std::span<const int> labels,
                                std::span<const std::string> domains, double threshold) {
  if (probabilities.size() != labels.size() || labels.size() != domains.size()) {
    throw ShapeError("evaluate: probabilities, labels and domains differ in length");
  }
  if (probabilities.empty()) throw ConfigError("evaluate: no records");
  std::map<std::string, Confusion> per_domain;
  Confusion in_domain;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kRealLabel && labels[i] != kFakeLabel) throw ConfigError("evaluate: labels must be 0 or 1");
    const bool predicted_real = probabilities[i] >= threshold;
    const bool real = labels[i] == kRealLabel;
    Confusion& c = per_domain[domains[i]];
    for (Confusion* t : {&c, is_ood_domain(domains[i]) ? nullptr : &in_domain}) {
      if (!t) continue;
      if (predicted_real) {
        (real ? t->tp : t->fp) += 1;
      } else {
        (real ? t->fn : t->tn) += 1;
      }
    }
  }
  EvalReport report;
  report.threshold = threshold;
  double ood_sum = 0, all_sum = 0;
  int ood_count = 0;
  for (const auto& [domain, c] : per_domain) {
    DomainReport d{domain, is_ood_domain(domain), metrics_from_confusion(c)};
    all_sum += d.metrics.accuracy;
    if (d.out_of_domain) {
      ood_sum += d.metrics.accuracy;
      ++ood_count;
    }
    report.domains.push_back(std::move(d));
  }
  report.has_ood = ood_count > 0;
  report.has_in_domain = in_domain.total() > 0;
  report.in_domain_accuracy = metrics_from_confusion(in_domain).accuracy;
  report.ood_average_accuracy = ood_count ? ood_sum / ood_count : 0.0;
  report.overall_average = all_sum / static_cast<double>(report.domains.size());
  return report;
}

ForwardResult<float> infer(DetectorModel<float>& model, std::span<const LabeledImage> samples, Index batch_size) {
  if (samples.empty()) throw ConfigError("no samples to run inference on");
  const Index n = static_cast<Index>(samples.size());
  const Index d = model.config().joint_dim();
  ForwardResult<float> out{Tensor<float>({n}), Tensor<float>({n, d})};
  for (Index start = 0; start < n; start += batch_size) {
    const Index end = std::min(n, start + batch_size);
    std::vector<RgbImage<float>> images;
    for (Index i = start; i < end; ++i) images.push_back(samples[static_cast<std::size_t>(i)].image);
    const ForwardResult<float> part = forward(model, std::span<const RgbImage<float>>(images));
    out.probabilities.data().segment(start, end - start) = part.probabilities.data();
    out.embeddings.data().segment(start * d, (end - start) * d) = part.embeddings.data();
  }
  return out;
}

EvalReport evaluate(DetectorModel<float>& model, std::span<const LabeledImage> samples, double threshold,
                    Index batch_size) {
  const ForwardResult<float> out = infer(model, samples, batch_size);
  std::vector<double> probs;
  std::vector<int> labels;
  std::vector<std::string> domains;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    probs.push_back(out.probabilities[static_cast<Index>(i)]);
    labels.push_back(samples[i].label);
    domains.push_back(samples[i].domain);
  }
  return evaluate_predictions(probs, labels, domains, threshold);
}

void print_report(std::ostream& out, const EvalReport& report) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << std::left << std::setw(20) << "domain" << std::right << std::setw(6) << "n" << std::setw(10) << "accuracy"
    << std::setw(11) << "precision" << std::setw(9) << "recall" << std::setw(9) << "f1"
    << "   tp/fp/tn/fn\n";
  for (const DomainReport& d : report.domains) {
    const Metrics& m = d.metrics;
    s << std::left << std::setw(20) << d.domain << std::right << std::setw(6) << m.confusion.total() << std::setw(10)
      << m.accuracy << std::setw(11) << m.precision << std::setw(9) << m.recall << std::setw(9) << m.f1 << "   "
      << m.confusion.tp << '/' << m.confusion.fp << '/' << m.confusion.tn << '/' << m.confusion.fn << '\n';
  }
  if (report.has_in_domain) s << "in-domain accuracy   " << report.in_domain_accuracy << '\n';
  if (report.has_ood) s << "OOD average accuracy " << report.ood_average_accuracy << '\n';
  s << "overall average      " << report.overall_average << '\n';
  out << s.str();
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  nlohmann::ordered_json domains = nlohmann::ordered_json::object();
  for (const DomainReport& d : report.domains) {
    const Metrics& m = d.metrics;
    domains[d.domain] = {{"out_of_domain", d.out_of_domain},
                         {"accuracy", m.accuracy},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"tp", m.confusion.tp},
                         {"fp", m.confusion.fp},
                         {"tn", m.confusion.tn},
                         {"fn", m.confusion.fn}};
  }
  j["domains"] = domains;
  j["in_domain_accuracy"] = report.has_in_domain ? nlohmann::ordered_json(report.in_domain_accuracy) : nlohmann::ordered_json(nullptr);
  j["ood_average_accuracy"] = report.has_ood ? nlohmann::ordered_json(report.ood_average_accuracy) : nlohmann::ordered_json(nullptr);
  j["overall_average"] = report.overall_average;
  return j.dump(2) + "\n";
}

void export_embeddings(const std::filesystem::path& path, std::span<const LabeledImage> samples,
                       const Tensor<float>& embeddings) {
  if (embeddings.rank() != 2 || embeddings.dim(0) != static_cast<Index>(samples.size())) {
    throw ShapeError("export_embeddings: expected [" + std::to_string(samples.size()) + ",D] embeddings, got " +
                     shape_string(embeddings.shape()));
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  const Index d = embeddings.dim(1);
  out << "path,label,domain";
  for (Index k = 0; k < d; ++k) out << ",e" << k;
  out << '\n' << std::setprecision(9);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << samples[i].path << ',' << samples[i].label << ',' << samples[i].domain;
    for (Index k = 0; k < d; ++k) out << ',' << embeddings[static_cast<Index>(i) * d + k];
    out << '\n';
  }
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

Eigen::MatrixXd to_matrix(const Tensor<float>& embeddings) {
  if (embeddings.rank() != 2) throw ShapeError("embeddings must be [N,D], got " + shape_string(embeddings.shape()));
  return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
             embeddings.raw(), embeddings.dim(0), embeddings.dim(1))
      .cast<double>();
}

Separation separation_score(const Eigen::MatrixXd& x, std::span<const int> labels) {
  const Index n = x.rows(), d = x.cols();
  if (static_cast<Index>(labels.size()) != n) throw ShapeError("separation_score: labels and rows differ");
  if (n < 4) throw ConfigError("separation_score needs at least 4 samples");
  const std::set<int> classes(labels.begin(), labels.end());
  if (classes.size() < 2) throw ConfigError("separation_score needs both labels present");

  Separation out;
  const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
  for (Index k = 0; k < std::min<Index>(2, d); ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);
    Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(k) = v;
  }
  out.pca_2d = centred * axes;

  double total = 0;
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd dist = (x.rowwise() - x.row(i)).rowwise().norm();
    double same = 0, other = 0;
    Index n_same = 0, n_other = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
        same += dist(j);
        ++n_same;
      } else {
        other += dist(j);
        ++n_other;
      }
    }
    if (n_same == 0) continue;  // singleton cluster scores 0
    const double a = same / static_cast<double>(n_same);
    const double b = other / static_cast<double>(n_other);
    const double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  out.silhouette = total / static_cast<double>(n);
  return out;
}

}  // namespace spyglass
