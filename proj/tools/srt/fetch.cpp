// `srt fetch`: download a dataset, verify checksums, write manifest.json.

#include "commands.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace srt::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RemoteFile {
  std::string name;
  std::string md5;  ///< empty when the publisher gives no checksum
};

struct DatasetSource {
  std::string base_url;
  std::vector<RemoteFile> files;
};

// Fashion-MNIST checksums as published alongside the archives. The gisette
// files carry none, so only their SHA-256 is recorded.
const std::map<std::string, DatasetSource>& sources() {
  static const std::map<std::string, DatasetSource> table{
      {"fashion_mnist",
       {"http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
        {{"train-images-idx3-ubyte.gz", "8d4fb7e6c68d591d4c3dfef9d3a84b8d"},
         {"train-labels-idx1-ubyte.gz", "25c81989df183df01b3e8a0aad5dffbe"},
         {"t10k-images-idx3-ubyte.gz", "bef4ecab320f06d8554ea6380940ec79"},
         {"t10k-labels-idx1-ubyte.gz", "bb300cfdad3c16e7a12a480ee83cd310"}}}},
      {"gisette",
       {"https://archive.ics.uci.edu/ml/machine-learning-databases/gisette/GISETTE/",
        {{"gisette_train.data", ""}, {"gisette_train.labels", ""}}}},
  };
  return table;
}

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

size_t append_body(char* data, size_t size, size_t count, void* user) {
  static_cast<Bytes*>(user)->insert(static_cast<Bytes*>(user)->end(), data, data + size * count);
  return size * count;
}

Bytes download(const std::string& url) {
  CURL* curl = curl_easy_init();
  if (!curl) throw NetworkError("curl initialisation failed");
  Bytes body;
  char error[CURL_ERROR_SIZE] = {0};
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 30L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, append_body);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
  curl_easy_setopt(curl, CURLOPT_ERRORBUFFER, error);
  const CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  if (rc != CURLE_OK) {
    throw NetworkError("download of " + url + " failed: " + (error[0] ? error : curl_easy_strerror(rc)));
  }
  return body;
}

std::string hex_digest(const EVP_MD* md, const Bytes& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, md, nullptr) != 1) {
    throw std::runtime_error("digest computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

/// gisette_train.data (one dense row of integers per sample) + labels -> LIBSVM text.
void convert_gisette(const fs::path& dir) {
  std::ifstream data(dir / "gisette_train.data");
  std::ifstream labels(dir / "gisette_train.labels");
  std::ofstream out(dir / "gisette_train.libsvm", std::ios::binary | std::ios::trunc);
  std::string row, label;
  while (std::getline(data, row) && std::getline(labels, label)) {
    std::istringstream values(row);
    std::istringstream lab(label);
    int y = 0;
    lab >> y;
    out << (y > 0 ? "1" : "-1");
    double v = 0;
    std::size_t index = 0;
    while (values >> v) {
      ++index;
      if (v != 0.0) out << ' ' << index << ':' << v;
    }
    out << '\n';
  }
}

}  // namespace

int cmd_fetch(const ExperimentConfig& c, const Options&) {
  if (!c.has_fetch) throw ConfigError("config error: 'fetch' section is required for the fetch command");
  const auto it = sources().find(c.fetch.dataset);
  if (it == sources().end()) {
    throw ConfigError("config error: 'fetch.dataset' unknown dataset '" + c.fetch.dataset +
                      "' (known: fashion_mnist, gisette)");
  }
  const DatasetSource& source = it->second;
  std::string base = c.fetch.base_url.empty() ? source.base_url : c.fetch.base_url;
  if (!base.empty() && base.back() != '/') base += '/';

  fs::create_directories(c.fetch.destination);
  json manifest{{"dataset", c.fetch.dataset}, {"files", json::array()}};
  curl_global_init(CURL_GLOBAL_DEFAULT);
  int code = exit_ok;
  try {
    for (const RemoteFile& file : source.files) {
      const std::string url = base + file.name;
      const Bytes body = download(url);
      const std::string md5 = hex_digest(EVP_md5(), body);
      const std::string sha256 = hex_digest(EVP_sha256(), body);
      json entry{{"name", file.name}, {"url", url},     {"bytes", body.size()},
                 {"md5", md5},        {"sha256", sha256}, {"pinned", !file.md5.empty()}};
      if (!file.md5.empty() && md5 != file.md5) {
        std::cerr << "srt: checksum mismatch for " << file.name << ": expected md5 " << file.md5 << ", got " << md5
                  << '\n';
        entry["status"] = "checksum mismatch";
        manifest["files"].push_back(entry);
        code = exit_checksum;
        break;
      }
      write_file(c.fetch.destination / file.name, body);
      entry["status"] = "ok";
      manifest["files"].push_back(entry);
    }
    if (code == exit_ok && c.fetch.dataset == "gisette") {
      convert_gisette(c.fetch.destination);
      manifest["converted"] = "gisette_train.libsvm";
    }
  } catch (const NetworkError& e) {
    std::cerr << "srt: " << e.what() << '\n';
    code = exit_network;
  }
  curl_global_cleanup();
  std::ofstream(c.fetch.destination / "manifest.json") << manifest.dump(2) << '\n';
  if (code == exit_ok) std::cout << "fetched " << c.fetch.dataset << " into " << c.fetch.destination.string() << '\n';
  return code;
}

}  // namespace srt::cli
