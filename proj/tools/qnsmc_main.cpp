#include "qnsmc/experiments.hpp"

#include <iostream>

int main(int argc, char** argv) {
  try {
    const auto cfg = qnsmc::parse_config({argv + 1, argv + argc});
    return qnsmc::run_experiment(cfg);
  } catch (const qnsmc::HelpRequested& h) {
    std::cout << h.text;
    return 0;
  } catch (const qnsmc::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
