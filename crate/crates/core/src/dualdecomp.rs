//! Dual decomposition (in progress).
