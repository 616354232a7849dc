#include <iostream>

#include "commands.hpp"
#include "jointpiv/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Joint particle and flow reconstruction for volumetric PIV"};
  app.require_subcommand(1);
  int status = jointpiv::cli::success;
  jointpiv::cli::register_commands(app, status);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : jointpiv::cli::usage_error;
  } catch (const jointpiv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case jointpiv::ErrorCode::invalid_argument:
      case jointpiv::ErrorCode::dimension_mismatch:
      case jointpiv::ErrorCode::io:
        return jointpiv::cli::usage_error;
      default:
        return jointpiv::cli::numerical_failure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return jointpiv::cli::numerical_failure;
  }
  return status;
}
