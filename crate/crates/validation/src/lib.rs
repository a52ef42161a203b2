//! Holds the `acceptance` test target, which runs the toolkit's
//! end-to-end criteria and prints one PASS or FAIL line for each.
