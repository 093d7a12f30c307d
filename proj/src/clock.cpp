#include "reporeview/clock.hpp"

#include <thread>

namespace reporeview {

void RealSleeper::sleep_for(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

}  // namespace reporeview
