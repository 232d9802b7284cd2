// Test double for the external-predictor bridge: a constant-velocity model
// speaking the line-delimited protocol. Flags select failure modes.

#include <json.hpp>

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

using nlohmann::json;

int main(int argc, char** argv) {
  bool grad = true, garbage = false, hang = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--no-grad") grad = false;
    if (a == "--garbage") garbage = true;
    if (a == "--hang") hang = true;
  }
  std::string line;
  while (std::getline(std::cin, line)) {
    const json req = json::parse(line);
    const std::string cmd = req.value("cmd", "");
    if (cmd == "shutdown") return 0;
    if (hang) {
      std::this_thread::sleep_for(std::chrono::seconds(30));
      continue;
    }
    if (garbage) {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    const auto& X = req["X"];
    const int T = req.value("horizon", 12);
    if (cmd == "predict") {
      json modes = json::array(), probs = json::array();
      for (const auto& h : X) {
        const double x0 = h.back()[0], y0 = h.back()[1];
        const double dx = x0 - h[h.size() - 2][0].get<double>(), dy = y0 - h[h.size() - 2][1].get<double>();
        json fut = json::array();
        for (int t = 1; t <= T; ++t) fut.push_back({x0 + t * dx, y0 + t * dy});
        modes.push_back(fut);
        probs.push_back(1.0);
      }
      std::cout << json{{"modes", json::array({modes})}, {"probs", json::array({probs})}}.dump()
                << std::endl;
    } else if (cmd == "grad") {
      if (!grad) {
        std::cout << R"({"error":"gradient not supported"})" << std::endl;
        continue;
      }
      const auto& dY = req["dY"][0];
      json dX = json::array();
      for (std::size_t i = 0; i < X.size(); ++i) {
        const std::size_t H = X[i].size();
        json g = json::array();
        for (std::size_t j = 0; j < H; ++j) g.push_back({0.0, 0.0});
        for (int t = 1; t <= T; ++t)
          for (int c = 0; c < 2; ++c) {
            const double v = dY[i][t - 1][c].get<double>();
            g[H - 1][c] = g[H - 1][c].get<double>() + (1.0 + t) * v;
            g[H - 2][c] = g[H - 2][c].get<double>() - t * v;
          }
        dX.push_back(g);
      }
      std::cout << json{{"dX", dX}}.dump() << std::endl;
    } else {
      std::cout << R"({"error":"unknown command"})" << std::endl;
    }
  }
  return 0;
}
