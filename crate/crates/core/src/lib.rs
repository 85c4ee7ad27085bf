//! Sponsored-token exchange core.
//!
//! Tokens are issued by sponsors against a quote-currency collateral
//! reserve and priced by per-round call auctions. Every state change is an
//! event in a hash-chained [`ledger`]; balances are never stored, only
//! replayed. [`exchange::Exchange`] turns commands into validated event
//! batches.

pub mod auction;
pub mod exchange;
pub mod fixed;
pub mod ids;
pub mod incentives;
pub mod ledger;
pub mod policy;
pub mod sponsor;

pub use exchange::{Command, Exchange, ExchangeConfig, ExchangeError, Outcome, Receipt};
pub use fixed::{Amount, Fraction, Price};
pub use ids::{AccountId, OrderId, TokenId};
pub use ledger::{Digest, Ledger, LedgerEntry, LedgerError, VerificationReport};
