// Placeholder main; the CLI is assembled after the library modules.
#include "dbcf/tracking.hpp"
#include "dbcf/serialization.hpp"

int main() { return 0; }
