// Line-delimited JSON scorer used to exercise the exec transport.
//   stub_scorer [uniform|missing|sum08|garbage|exit|echo-order]

#include <iostream>
#include <string>

#include "json.hpp"

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "uniform";
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "exit") return 0;
    if (mode == "garbage") {
      std::cout << "not json" << std::endl;
      continue;
    }
    const auto request = nlohmann::json::parse(line);
    auto scores = nlohmann::json::array();
    for (const auto& item : request["batch"]) {
      const auto n = item["options"].size();
      std::vector<double> probs(n, (mode == "sum08" ? 0.8 : 1.0) / static_cast<double>(n));
      scores.push_back({{"id", item["id"]}, {"probs", probs}});
    }
    if (mode == "missing" && !scores.empty()) scores.erase(scores.size() - 1);
    if (mode == "echo-order") {
      // Reply in reverse order; the client must reorder by id.
      nlohmann::json reversed = nlohmann::json::array();
      for (auto it = scores.rbegin(); it != scores.rend(); ++it) reversed.push_back(*it);
      scores = reversed;
    }
    std::cout << nlohmann::json{{"scores", scores}}.dump() << std::endl;
  }
  return 0;
}
