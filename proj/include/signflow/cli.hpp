#pragma once

namespace signflow::cli {

// Entry point behind the signflow binary. Exit codes: 0 success, 1 config
// error, 2 data error, 3 mode contradiction.
int run(int argc, const char* const* argv);

}  // namespace signflow::cli
