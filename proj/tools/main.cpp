#include "app.hpp"

int main(int argc, char **argv) { return nlceqa::app::run(argc, argv); }
