#include <iostream>

#include "nehari/cli.hpp"

int main(int argc, char** argv)
{
    return nehari::run_cli(argc, argv, std::cout, std::cerr);
}
