#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "maxcorr/matrix.hpp"

namespace maxcorr {

inline const std::array<std::string, 5> kTbOutcomeNames = {"Died", "Still on treatment",
                                                           "Completed", "Cured", "Failure"};

/// One modality's patient x feature table. Rows follow Dataset::patient_ids.
struct ModalityTable {
  std::string name;
  std::vector<std::string> feature_names;
  Matrix values;                      // missing cells hold 0
  std::vector<std::uint8_t> missing;  // row-major mask, 1 = missing

  std::size_t features() const noexcept { return feature_names.size(); }
  bool is_missing(std::size_t row, std::size_t col) const {
    return missing[row * values.cols() + col] != 0;
  }
  std::size_t missing_count() const;
};

struct Dataset {
  std::vector<std::string> patient_ids;
  std::vector<ModalityTable> modalities;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;

  std::size_t patients() const noexcept { return patient_ids.size(); }
  std::size_t num_modalities() const noexcept { return modalities.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
  std::vector<std::size_t> feature_dims() const;
  bool complete() const;
  /// Throws DataError when a structural invariant is broken.
  void validate() const;
};

/// Reads `labels.csv` (patient_id,label), optional `classes.txt` (one class
/// name per line, default five generic names) and every other `*.csv` in
/// the directory as a modality, in filename order. Each modality file has a
/// header row of feature names; the first column is the patient id and an
/// empty cell is missing. Patients absent from a modality file get an
/// all-missing row.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes the layout read by load_dataset. Values use 17 significant digits.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Replaces each missing cell by the mean of that feature over the observed
/// values of the `train_rows` patients.
Dataset impute_means(const Dataset& ds, std::span<const std::size_t> train_rows);

/// Complete-feature blocks for the given rows, one matrix per modality.
std::vector<Matrix> gather_rows(const Dataset& ds, std::span<const std::size_t> rows);
/// All modalities concatenated column-wise for the given rows.
Matrix gather_concatenated(const Dataset& ds, std::span<const std::size_t> rows);

struct SyntheticSpec {
  std::size_t patients = 200;
  std::vector<std::size_t> feature_dims = {20, 30, 25};
  std::size_t n_classes = 5;
  std::size_t latent_dim = 8;
  double noise_sigma = 0.5;
  double missing_rate = 0.0;
  double class_separation = 0.5;  // std-dev of the class-mean entries
  std::uint64_t seed = 1;

  void validate() const;
};

/// Latent factor model: u = mu_class + N(0, sigma^2), x^k = M_k u + N(0, sigma^2)
/// with fixed Gaussian mixing maps M_k. Cells go missing independently with
/// probability missing_rate.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace maxcorr
