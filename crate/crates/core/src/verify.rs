//! Statistical verification (under construction).
