//! Holds the `acceptance` test. It is a separate package so that cargo, which
//! stops at the first failing test binary, runs it after every other suite.
