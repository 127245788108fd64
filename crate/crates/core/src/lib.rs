//! Non-termination checking for a C subset.
//!
//! Every loop is instrumented with a recurrent-state assertion: in one
//! nondeterministically chosen iteration the loop's state is stored, and every
//! later iteration asserts that the current state differs from the stored one.
//! A bounded model checker then tries to violate those assertions at growing
//! unwind bounds. A violation is a lasso: replaying its inputs reaches the same
//! state twice, so the loop can run forever.

pub mod bench;
pub mod driver;
pub mod encode;
pub mod frontend;
pub mod instrument;
pub mod interp;
pub mod normalize;
pub mod satcore;
pub mod witness;
