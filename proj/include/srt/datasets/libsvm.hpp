#pragma once

#include <srt/datasets/io.hpp>
#include <srt/datasets/labeled_dataset.hpp>
#include <srt/errors.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace srt {

namespace detail {

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

inline bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(out);
}

inline bool parse_index(std::string_view token, std::size_t& out) {
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

template <typename T>
void append_number(std::string& out, T value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  out.append(buffer, ptr);
}

}  // namespace detail

/// Parses LIBSVM text: one `<label> <index>:<value> ...` sample per nonempty line,
/// 1-based strictly ascending indices no larger than `dimension`. Labels -1/0 map
/// to class 0 and +1 to class 1. Omitted features are zero.
template <typename Feature = double>
LabeledDataset<Feature> parse_libsvm(std::istream& in, std::size_t dimension) {
  if (dimension == 0) throw ParameterError("parse_libsvm: dimension must be positive");
  std::vector<Feature> values;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_whitespace(line);
    if (tokens.empty()) continue;

    double label = 0.0;
    if (!detail::parse_double(tokens[0], label)) {
      throw ParseError(line_no, "non-numeric label '" + std::string(tokens[0]) + "'");
    }
    if (label == 1.0) {
      labels.push_back(1);
    } else if (label == -1.0 || label == 0.0) {
      labels.push_back(0);
    } else {
      throw ParseError(line_no, "label '" + std::string(tokens[0]) + "' is not one of -1, 0, +1");
    }

    const std::size_t row_start = values.size();
    values.resize(row_start + dimension, Feature{0});
    std::size_t previous = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const std::string_view token = tokens[t];
      const std::size_t colon = token.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "expected <index>:<value>, got '" + std::string(token) + "'");
      }
      std::size_t index = 0;
      double value = 0.0;
      if (!detail::parse_index(token.substr(0, colon), index)) {
        throw ParseError(line_no, "non-numeric index in '" + std::string(token) + "'");
      }
      if (!detail::parse_double(token.substr(colon + 1), value)) {
        throw ParseError(line_no, "non-numeric value in '" + std::string(token) + "'");
      }
      if (index < 1 || index > dimension) {
        throw ParseError(line_no, "index " + std::to_string(index) + " out of range [1, " +
                                      std::to_string(dimension) + "]");
      }
      if (index == previous) throw ParseError(line_no, "duplicate index " + std::to_string(index));
      if (index < previous) {
        throw ParseError(line_no, "index " + std::to_string(index) + " follows " + std::to_string(previous) +
                                      " (indices must ascend)");
      }
      previous = index;
      values[row_start + index - 1] = static_cast<Feature>(value);
    }
  }
  if (labels.empty()) throw ParseError(line_no, "no samples");
  const std::size_t rows = labels.size();
  return {Matrix<Feature>(rows, dimension, std::move(values)), std::move(labels), 2};
}

template <typename Feature = double>
LabeledDataset<Feature> parse_libsvm(std::string_view text, std::size_t dimension) {
  std::istringstream in{std::string(text)};
  return parse_libsvm<Feature>(in, dimension);
}

/// Writes LIBSVM text that parses back to an identical dataset: class 0 is
/// written as -1, zero features are omitted, values use shortest round-trip form.
template <typename Feature>
void write_libsvm(std::ostream& out, const LabeledDataset<Feature>& data) {
  std::string line;
  for (std::size_t r = 0; r < data.size(); ++r) {
    line.clear();
    line += data.labels[r] == 1 ? "1" : "-1";
    const auto row = data.sample(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] == Feature{0}) continue;
      line += ' ';
      detail::append_number(line, c + 1);
      line += ':';
      detail::append_number(line, row[c]);
    }
    line += '\n';
    out << line;
  }
}

/// Loads a (possibly gzip-compressed) LIBSVM file.
template <typename Feature = double>
LabeledDataset<Feature> load_libsvm_file(const std::filesystem::path& path, std::size_t dimension) {
  const Bytes bytes = read_data_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  return parse_libsvm<Feature>(in, dimension);
}

}  // namespace srt
