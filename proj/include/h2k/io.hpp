#pragma once

// Plain-text file formats: header-less CSV matrices, one-value-per-line
// vectors, and the effects table.

#include <filesystem>
#include <string>

#include "h2k/core_model.hpp"

namespace h2k::io {

/// Header-less CSV of reals; every row must have the same width.
Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& x);

/// Raw 0/1/2 allele counts as header-less CSV.
CountMatrix read_counts_csv(const std::filesystem::path& path);
void write_counts_csv(const std::filesystem::path& path, const CountMatrix& f);

/// One real per line; blank lines are ignored.
Vector read_vector(const std::filesystem::path& path);
void write_vector(const std::filesystem::path& path, const Vector& v);

/// MAF file: one frequency per line, each in [0.01, 0.5].
MafVector read_mafs(const std::filesystem::path& path);

/// 0-based SNP indices, one per line; returned sorted and validated.
IndexSet read_index_set(const std::filesystem::path& path, Index m);

/// "index,u,psi,causal" with a header row; one row per SNP.
void write_effects_csv(const std::filesystem::path& path, const EffectVector& u);
EffectVector read_effects_csv(const std::filesystem::path& path);

std::string format_double(double x);

}  // namespace h2k::io
