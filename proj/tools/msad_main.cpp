#include <iostream>

int main() {
  std::cout << "msad: CLI pending\n";
  return 0;
}
