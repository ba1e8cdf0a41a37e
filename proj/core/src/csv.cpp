#include "dtadpd/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "dtadpd/error.hpp"

namespace dtadpd {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
  }
  return fields;
}

bool parse_long(const std::string& s, long& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end && !s.empty();
}

long parse_count(const std::string& s, const char* column, std::size_t line_no) {
  long v = 0;
  if (!parse_long(s, v))
    throw DataError("csv line " + std::to_string(line_no) + ": column '" + column +
                    "' is not an integer: '" + s + "'");
  return v;
}

}  // namespace

std::vector<StudyCounts> read_studies_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw DataError("csv: empty input");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (split_fields(line) != std::vector<std::string>{"study", "tp", "fn", "fp", "tn"})
    throw DataError("csv: expected header 'study,tp,fn,fp,tn', got '" + line + "'");

  std::vector<StudyCounts> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 5)
      throw DataError("csv line " + std::to_string(line_no) + ": expected 5 fields, got " +
                      std::to_string(fields.size()));
    StudyCounts c;
    c.study_id = fields[0].empty() ? std::to_string(out.size() + 1) : fields[0];
    c.tp = parse_count(fields[1], "tp", line_no);
    c.fn = parse_count(fields[2], "fn", line_no);
    c.fp = parse_count(fields[3], "fp", line_no);
    c.tn = parse_count(fields[4], "tn", line_no);
    try {
      validate(c);
    } catch (const DataError& e) {
      throw DataError("csv line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(c);
  }
  if (out.empty()) throw DataError("csv: no study rows");
  return out;
}

std::vector<StudyCounts> read_studies_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open '" + path + "'");
  return read_studies_csv(in);
}

}  // namespace dtadpd
