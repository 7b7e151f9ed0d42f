//! Calendars, term rates and convexity adjustments.

pub mod calendar;
pub mod convexity;
pub mod rates;

pub use calendar::{act360, add_months, make_schedule, Calendar, Schedule};
pub use convexity::{
    convexity, convexity_1m, convexity_3m, convexity_curve, convexity_report, convexity_shadow, Convexity,
    equivalent_forward, ConvexityMethod, ConvexityReport, ConvexityRow,
};
pub use rates::{backward_rate, forward_term_rate, term_curve, TermCurve, TermPoint, DEFAULT_TENORS};
