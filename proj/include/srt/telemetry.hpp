#pragma once

#include <srt/datasets/libsvm.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace srt {

/// One row of training telemetry.
struct IterationRecord {
  std::uint64_t iteration = 0;
  std::uint64_t epoch = 0;
  double batch_loss = 0.0;  ///< F_S(w_k)
  double alpha = 0.0;       ///< alpha_k before adjustment
  double alpha_eff = 0.0;   ///< alpha_k / (mean(v_M) + 1), the step actually taken
  std::optional<double> rho_hat;  ///< empty when the ratio sample was invalid
  double m_hat = 0.0;
  double v_hat = 0.0;
  double grad_sq_norm = 0.0;
  std::optional<double> full_loss;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

inline constexpr const char* csv_header = "iter,epoch,batch_loss,alpha,alpha_eff,rho_hat,m_hat,v_hat,grad_sq_norm,full_loss";

/// Doubles are printed in shortest round-trip form, so parsing a row recovers the record exactly.
inline std::string to_csv_row(const IterationRecord& r) {
  std::string line;
  detail::append_number(line, r.iteration);
  line += ',';
  detail::append_number(line, r.epoch);
  for (double v : {r.batch_loss, r.alpha, r.alpha_eff}) {
    line += ',';
    detail::append_number(line, v);
  }
  line += ',';
  if (r.rho_hat) detail::append_number(line, *r.rho_hat);
  for (double v : {r.m_hat, r.v_hat, r.grad_sq_norm}) {
    line += ',';
    detail::append_number(line, v);
  }
  line += ',';
  if (r.full_loss) detail::append_number(line, *r.full_loss);
  return line;
}

inline void write_records_csv(std::ostream& out, const std::vector<IterationRecord>& records) {
  out << csv_header << '\n';
  for (const auto& r : records) out << to_csv_row(r) << '\n';
}

/// Streams records to a CSV file, flushing every `flush_every` rows and on close.
class CsvRecordWriter {
 public:
  explicit CsvRecordWriter(const std::filesystem::path& path, std::size_t flush_every = 1000)
      : out_(path, std::ios::binary | std::ios::trunc), flush_every_(flush_every) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    out_ << csv_header << '\n';
  }

  void write(const IterationRecord& r) {
    pending_ += to_csv_row(r);
    pending_ += '\n';
    if (++pending_rows_ >= flush_every_) flush();
  }

  void flush() {
    out_ << pending_;
    out_.flush();
    pending_.clear();
    pending_rows_ = 0;
  }

  ~CsvRecordWriter() {
    try {
      flush();
    } catch (...) {
    }
  }

 private:
  std::ofstream out_;
  std::size_t flush_every_;
  std::string pending_;
  std::size_t pending_rows_ = 0;
};

}  // namespace srt
