//! C ABI surface (work in progress).
