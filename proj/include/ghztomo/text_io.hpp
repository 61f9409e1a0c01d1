// text_io.hpp
// Plain-text artifacts. Every file may start with '#' comment lines, which
// the writers fill with provenance (resolved configuration) and the readers
// skip.
//
// Count table, one row per setting, whitespace separated:
//   setting raw_count duration_s trigger_singles accidental_estimate scale
// Reals are written with 17 significant digits, so reading and rewriting a
// table reproduces it byte for byte.
//
// Reconstruction: keyword lines (method, model, converged, physical,
// iterations, flux, log_likelihood, min_eigenvalue) followed by `rho` and 64
// lines of "real imag" in row-major order, 12 significant digits.
//
// Report: keyword lines, scalars at 6 significant digits, optional
// `uncertainty <name> <mean> <stddev>` lines after `mc_trials`.

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "ghztomo/analysis.hpp"
#include "ghztomo/reconstruct.hpp"
#include "ghztomo/tomo_model.hpp"

namespace ghztomo::text_io {

// Formats `value` with printf-style %.{digits-1}e, or %.17g when digits == 0.
std::string format_real(double value, int significant_digits);

// Prefixes every line of `text` with "# ".
std::string comment_block(std::string_view text);

std::string write_counts(const TomographySet& set, std::string_view header = {});
TomographySet read_counts(std::string_view text);

struct StoredReconstruction {
  ReconstructionResult result;
  LikelihoodModel model = LikelihoodModel::Poisson;
};

std::string write_reconstruction(const ReconstructionResult& result, LikelihoodModel model,
                                 std::string_view header = {});
StoredReconstruction read_reconstruction(std::string_view text);

std::string write_report(const AnalysisReport& report, std::string_view header = {});
AnalysisReport read_report(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace ghztomo::text_io
