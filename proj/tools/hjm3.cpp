#include "hjm3/cli.hpp"

int main(int argc, char** argv) { return hjm3::dispatch(std::vector<std::string>(argv, argv + argc)); }
