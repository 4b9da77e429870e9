#include <iostream>
int main() { std::cout << "taxlab placeholder\n"; return 0; }
