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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spyglass/data.hpp"
#include "spyglass/model.hpp"

namespace spyglass {

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
};

/// Scores where the positive class is "real" (label 1).
struct Metrics {
  Confusion confusion;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Ratios with 0/0 taken as 0.
Metrics metrics_from_confusion(const Confusion& c);

struct DomainReport {
  std::string domain;
  bool out_of_domain = false;
  Metrics metrics;
};

struct EvalReport {
  std::vector<DomainReport> domains;  // sorted by tag
  double threshold = 0.5;
  double in_domain_accuracy = 0;      // pooled over in-domain records
  double ood_average_accuracy = 0;    // unweighted mean over OOD domains
  double overall_average = 0;         // unweighted mean over all domains
  bool has_in_domain = false;
  bool has_ood = false;

  const DomainReport* find(const std::string& domain) const;
};

/// Prediction is real when probability >= threshold.
EvalReport evaluate_predictions(std::span<const double> probabilities, std::span<const int> labels,
                                std::span<const std::string> domains, double threshold = 0.5);

EvalReport evaluate(DetectorModel<float>& model, std::span<const LabeledImage> samples, double threshold = 0.5,
                    Index batch_size = 64);

void print_report(std::ostream& out, const EvalReport& report);
std::string report_json(const EvalReport& report);

/// Probabilities and joint embeddings for every sample, in input order.
ForwardResult<float> infer(DetectorModel<float>& model, std::span<const LabeledImage> samples,
                           Index batch_size = 64);

/// CSV header `path,label,domain,e0..e{D-1}`, values with 9 significant digits.
void export_embeddings(const std::filesystem::path& path, std::span<const LabeledImage> samples,
                       const Tensor<float>& embeddings);

struct Separation {
  Eigen::MatrixXd pca_2d;  // N x 2
  double silhouette = 0;
};

/**
 * Top-2 principal components of the centred embeddings (each axis signed so
 * its largest-magnitude loading is positive) and the mean silhouette over
 * samples under Euclidean distance in the full space. Identical embeddings
 * score 0.
 */
Separation separation_score(const Eigen::MatrixXd& embeddings, std::span<const int> labels);

Eigen::MatrixXd to_matrix(const Tensor<float>& embeddings);

}  // namespace spyglass
