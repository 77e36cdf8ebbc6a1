#include <iostream>

int main() {
    std::cout << "qtl: placeholder\n";
    return 0;
}
