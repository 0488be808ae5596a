//! The seven protocol layers. Each file holds the pure functions of one layer;
//! the simulator wires them together through messages.

pub mod container;
pub mod link;
pub mod network;
pub mod order;
pub mod physical;
pub mod product;
pub mod transport;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Layer number as used in traces: 1 is physical, 7 is product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Layer {
    Physical = 1,
    Link = 2,
    Network = 3,
    Transport = 4,
    Order = 5,
    Container = 6,
    Product = 7,
}

impl Layer {
    pub const ALL: [Layer; 7] = [
        Layer::Physical,
        Layer::Link,
        Layer::Network,
        Layer::Transport,
        Layer::Order,
        Layer::Container,
        Layer::Product,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Layer> {
        Self::ALL.get((n as usize).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Layer::Physical => "physical",
            Layer::Link => "link",
            Layer::Network => "network",
            Layer::Transport => "transport",
            Layer::Order => "order",
            Layer::Container => "container",
            Layer::Product => "product",
        }
    }

    pub fn below(self) -> Option<Layer> {
        Self::from_number(self.number() - 1)
    }

    pub fn above(self) -> Option<Layer> {
        Self::from_number(self.number() + 1)
    }
}

impl From<Layer> for u8 {
    fn from(l: Layer) -> u8 {
        l.number()
    }
}

impl TryFrom<u8> for Layer {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Layer::from_number(n).ok_or_else(|| format!("no layer {n}"))
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{} {}", self.number(), self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbering_round_trips() {
        for l in Layer::ALL {
            assert_eq!(Layer::from_number(l.number()), Some(l));
        }
        assert_eq!(Layer::from_number(0), None);
        assert_eq!(Layer::from_number(8), None);
        assert_eq!(Layer::Physical.below(), None);
        assert_eq!(Layer::Product.above(), None);
        assert_eq!(Layer::Order.below(), Some(Layer::Transport));
    }
}
