#pragma once

// Dataset CSV format:
//
//   #censor_at=5          (optional metadata line)
//   y,x1,x2,...,xp
//   3,1.0,0.25,...
//
// The response column comes first. Optional trailing columns named `u_fp`
// and `u_fn` carry per-observation misclassification rates.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "jini/models.hpp"

namespace jini {

/// Malformed dataset file. `line()` is 1-based.
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct LoadedDataset {
  Dataset data;
  std::optional<MisclassLatents> latents;
};

LoadedDataset read_dataset_csv(std::istream& in, ResponseKind kind);
LoadedDataset read_dataset_csv(const std::filesystem::path& path, ResponseKind kind);

void write_dataset_csv(std::ostream& out, const Dataset& data,
                       const MisclassLatents* latents = nullptr);

}  // namespace jini
