// Key-rate sweep over total system loss; see README for flags.
#include <cowqkd/run_config.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  using namespace cowqkd;
  RunConfig config;
  try {
    config = parse_config(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const HelpRequested& h) {
    std::cout << h.what();
    return exit_code::ok;
  } catch (const UsageError& e) {
    std::cerr << "cowrate: " << e.what() << "\nRun with --help for usage.\n";
    return exit_code::usage;
  }

  try {
    const int code = run_sweep(config, std::cout);
    if (code == exit_code::partial) std::cerr << "cowrate: some loss points failed to solve\n";
    if (code == exit_code::numeric) std::cerr << "cowrate: numerical failure\n";
    return code;
  } catch (const UsageError& e) {
    std::cerr << "cowrate: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const std::exception& e) {
    std::cerr << "cowrate: " << e.what() << '\n';
    return exit_code::numeric;
  }
}
