#pragma once

#include <cstdio>
#include <iosfwd>
#include <string>
#include <vector>

#include "drbart/data.hpp"
#include "drbart/sampler.hpp"

namespace drbart {

// ---- CSV -------------------------------------------------------------------

/// Header plus string cells. Quoted fields with doubled quotes are supported.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Throws InputError (naming the line) on ragged rows or a missing header.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

struct LoadedData {
  Dataset raw;  // raw values, columns in `covars` order
  Standardization standardization;
  Dataset model;  // standardized frame
};

/// Reads the response and covariate columns (all other columns when
/// `covars` is empty). Missing columns, empty or non-numeric cells and
/// non-finite values raise InputError naming the row and column; a constant
/// response raises "zero response range".
LoadedData load_csv(const std::string& path, const std::string& response,
                    const std::vector<std::string>& covars);
LoadedData load_csv(std::istream& in, const std::string& response,
                    const std::vector<std::string>& covars);

/// Writes a header and numeric rows with round-trip precision.
void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// ---- Draw files ------------------------------------------------------------

inline constexpr int kDrawSchemaVersion = 1;

/// Everything needed to interpret a draw file on its own.
struct DrawFileHeader {
  int schema_version = kDrawSchemaVersion;
  ChainConfig config;
  Standardization standardization;
  int chain = 0;

  bool operator==(const DrawFileHeader&) const;
};

struct DrawFile {
  DrawFileHeader header;
  std::vector<PosteriorDraw> draws;
};

std::string header_to_json_line(const DrawFileHeader& h);
std::string draw_to_json_line(const PosteriorDraw& d);
/// Parsers for single lines. Throw InputError on malformed content.
DrawFileHeader header_from_json_line(const std::string& line);
PosteriorDraw draw_from_json_line(const std::string& line);

/// Appends whole lines with a single write each, flushed, so a reader never
/// sees a partial record unless the process dies mid-write.
class DrawWriter {
 public:
  DrawWriter(const std::string& path, const DrawFileHeader& header);
  ~DrawWriter();
  DrawWriter(const DrawWriter&) = delete;
  DrawWriter& operator=(const DrawWriter&) = delete;

  void append(const PosteriorDraw& d);
  void close();

 private:
  void write_line(const std::string& line);
  std::FILE* file_ = nullptr;
  std::string path_;
};

void save_draws(const std::string& path, const DrawFileHeader& header,
                const std::vector<PosteriorDraw>& draws);
/// Validates the schema version; a last line without a newline or with
/// broken JSON is reported as truncation.
DrawFile load_draws(const std::string& path);
DrawFile load_draws(std::istream& in);

}  // namespace drbart
