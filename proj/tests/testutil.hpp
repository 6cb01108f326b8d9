#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace testutil {

namespace fs = std::filesystem;

// Scratch directory removed at scope exit.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "profcast_test_XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path file(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// The 53 economies with complete panels, in presentation order.
inline const std::vector<std::string>& table1_countries() {
  static const std::vector<std::string> kCountries = {
      "Albania", "Argentina", "Australia", "Austria", "Belgium",
      "Brazil", "Bulgaria", "Canada", "Chile", "Colombia",
      "Croatia", "Czech Republic", "Denmark", "Estonia", "Finland",
      "France", "Germany", "Greece", "Hong Kong–China", "Hungary",
      "Iceland", "Indonesia", "Ireland", "Israel", "Italy",
      "Japan", "Jordan", "Kazakhstan", "Korea", "Latvia",
      "Lithuania", "Macao–China", "Mexico", "Montenegro", "Netherlands",
      "New Zealand", "Norway", "Peru", "Poland", "Portugal",
      "Qatar", "Romania", "Singapore", "Slovak Republic", "Slovenia",
      "Spain", "Sweden", "Switzerland", "Thailand", "Turkey",
      "United Kingdom", "United States", "Uruguay"};
  return kCountries;
}

}  // namespace testutil
