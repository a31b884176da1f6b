//! Decimal digits of pi, used as the deterministic sign sequence of SCR
//! input weights.

use std::sync::OnceLock;

const CACHED: usize = 1024;

/// The first `n` decimal digits of pi after the decimal point.
pub fn pi_decimals(n: usize) -> Vec<u8> {
    static CACHE: OnceLock<Vec<u8>> = OnceLock::new();
    if n <= CACHED {
        return CACHE.get_or_init(|| spigot(CACHED))[..n].to_vec();
    }
    spigot(n)
}

// Rabinowitz-Wagon spigot with predigit/nines bookkeeping.
fn spigot(n: usize) -> Vec<u8> {
    // a few guard digits so held-back nines are flushed
    let total = n + 8;
    let len = 10 * total / 3 + 1;
    let mut a = vec![2u64; len];
    let mut out: Vec<u8> = Vec::with_capacity(total + 1);
    let mut nines = 0usize;
    let mut predigit: Option<u8> = None;
    for _ in 0..total {
        let mut q = 0u64;
        for i in (1..=len).rev() {
            let den = 2 * i as u64 - 1;
            let x = 10 * a[i - 1] + q * i as u64;
            a[i - 1] = x % den;
            q = x / den;
        }
        a[0] = q % 10;
        q /= 10;
        match q {
            9 => nines += 1,
            10 => {
                out.push(predigit.map_or(1, |p| p + 1));
                out.extend(std::iter::repeat_n(0, nines));
                predigit = Some(0);
                nines = 0;
            }
            d => {
                if let Some(p) = predigit {
                    out.push(p);
                }
                out.extend(std::iter::repeat_n(9, nines));
                predigit = Some(d as u8);
                nines = 0;
            }
        }
    }
    // drop the leading 3
    out.drain(..1);
    out.truncate(n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI_100: &str = "1415926535897932384626433832795028841971693993751058209749445923078164062862089986280348253421170679";

    #[test]
    fn first_hundred_digits() {
        let got: String = pi_decimals(100).iter().map(|d| char::from(b'0' + d)).collect();
        assert_eq!(got, PI_100);
    }

    #[test]
    fn cache_and_direct_agree() {
        assert_eq!(pi_decimals(1024)[..], spigot(1100)[..1024]);
        // digits 762..767 are the Feynman point "999999"
        assert_eq!(&pi_decimals(2000)[761..767], &[9, 9, 9, 9, 9, 9]);
    }
}
