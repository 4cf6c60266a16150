#include <betakde/cli.hpp>

int main(int argc, char** argv)
{
  return betakde::cli_main(argc, argv);
}
