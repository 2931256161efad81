//! Finite-difference check of every differentiable layer.

use tactile_hardness::net::gradcheck::check_all;

fn main() {
    for c in check_all(20, 42) {
        println!("{:10} {:3} instances  worst relative error {:.2e}", c.op, c.instances, c.max_rel_error);
    }
}
