#include <iostream>

int main() {
  std::cout << "querymesh: subcommands land here\n";
  return 0;
}
