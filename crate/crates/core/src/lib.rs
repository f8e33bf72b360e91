//! Exact symbolic engine for explicit theta-lift test vectors: p-adic
//! arithmetic, quadratic spaces, Schwartz function algebra, the Weil action,
//! GSp(4) cosets, and a brute-force numeric oracle.

pub mod gsp4cosets;
pub mod localfield;
pub mod oracle;
pub mod quadspace;
pub mod schwartz;
pub mod symbolic;
pub mod thetalift;
pub mod weilrep;
