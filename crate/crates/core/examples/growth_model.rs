//! Evaluates the access-point growth power law for a range of years.

use chanalloc::spectrum::growth_model;

fn main() {
    for year in [2001, 2005, 2010, 2014, 2016, 2018, 2020] {
        println!("{year}: {:>12.0}", growth_model(year).unwrap());
    }
}
