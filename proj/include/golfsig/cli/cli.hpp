#pragma once

namespace golfsig::cli {
int run(int argc, char** argv);
}
