// Prints the ray readings and recoverability of a rover at a few poses in the
// default obstacle field.

#include <iomanip>
#include <iostream>

#include "nsa/runtime/systems.hpp"

using namespace nsa;

int main() {
    const plants::RoverParams p;
    const auto field = plants::generate_obstacle_field(7);
    const runtime::RoverSystem sys(p, field);
    std::cout << field.circles.size() << " obstacles\n" << std::fixed << std::setprecision(3);

    for (const auto& [x, y, heading, v] : {std::tuple{0.0, 0.0, 0.0, 0.0}, std::tuple{-3.0, -2.0, 1.2, 0.8},
                                           std::tuple{2.5, -1.0, -2.0, 0.4}}) {
        const auto s = plants::make_rover_state(x, y, heading, v, field, p);
        if (plants::rover_collides(s, field, p)) {
            std::cout << "(" << x << ", " << y << ") collides\n";
            continue;
        }
        std::cout << "(" << x << ", " << y << ") heading " << heading << " speed " << v << ": l_min "
                  << s.min_reading() << (sys.recoverable(s) ? ", recoverable\n" : ", not recoverable\n");
    }
}
