//! PDE bridge (under construction).
