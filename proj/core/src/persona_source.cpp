#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "simdrift/errors.hpp"
#include "simdrift/population.hpp"
#include "simdrift/rng.hpp"

namespace simdrift {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

Table parse_table(std::string_view text, char delimiter) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(field_started ? field : trim(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) lines.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (!field_started) {
      field += c;
    }
  }
  if (quoted) throw DataError("table: unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  if (lines.empty()) throw DataError("table: no header row");

  Table t;
  t.header = std::move(lines.front());
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].size() != t.header.size()) {
      throw DataError("table: row " + std::to_string(r - 1) + " has " +
                      std::to_string(lines[r].size()) + " fields, header has " +
                      std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(lines[r]));
  }
  return t;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open persona source " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const auto text = buf.str();
  char delim = ',';
  const auto first_line = text.substr(0, text.find('\n'));
  if (path.extension() == ".tsv" || first_line.find('\t') != std::string::npos) delim = '\t';
  return parse_table(text, delim);
}

PersonaSample sample_personas(const Table& table, const std::vector<AttributeSchema>& schemas,
                              std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> columns;
  for (const auto& s : schemas) {
    const auto it = std::find(table.header.begin(), table.header.end(), s.name);
    if (it == table.header.end()) throw SchemaError("persona source is missing column '" + s.name + "'");
    columns.push_back(static_cast<std::size_t>(it - table.header.begin()));
  }
  const auto id_it = std::find(table.header.begin(), table.header.end(), "id");
  const bool has_id = id_it != table.header.end();
  const auto id_col = static_cast<std::size_t>(id_it - table.header.begin());

  // Validate every row up front so errors are independent of the draw.
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t k = 0; k < schemas.size(); ++k) {
      const auto& s = schemas[k];
      const auto& v = table.rows[r][columns[k]];
      if (s.categorical() && std::find(s.options.begin(), s.options.end(), v) == s.options.end()) {
        throw SchemaError("persona source row " + std::to_string(r) + ": '" + v +
                          "' is not an option of '" + s.name + "'");
      }
    }
  }

  PersonaSample out;
  if (n == 0) return out;
  if (table.rows.empty()) throw DataError("persona source has no rows");

  Rng rng(seed);
  std::vector<std::size_t> picks;
  if (n <= table.rows.size()) {
    std::vector<std::size_t> idx(table.rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    picks.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    out.with_replacement = true;
    for (std::size_t i = 0; i < n; ++i) picks.push_back(rng.below(table.rows.size()));
  }

  std::map<std::string, int> uses;
  for (const auto r : picks) {
    Persona p;
    std::string id = has_id ? table.rows[r][id_col] : "row" + std::to_string(r);
    const int k = uses[id]++;
    if (k > 0) id += "#" + std::to_string(k);
    p.id = std::move(id);
    for (std::size_t c = 0; c < schemas.size(); ++c) {
      p.attributes.emplace_back(schemas[c].name, table.rows[r][columns[c]]);
    }
    out.personas.push_back(std::move(p));
  }
  return out;
}

PersonaSample load_personas(const std::filesystem::path& source,
                            const std::vector<AttributeSchema>& schemas, std::size_t n,
                            std::uint64_t seed) {
  return sample_personas(read_table(source), schemas, n, seed);
}

}  // namespace simdrift
