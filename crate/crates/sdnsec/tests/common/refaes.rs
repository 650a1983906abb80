//! Reference AES-128 block encryption, table-free and written straight
//! from the standard's round structure. Test-only: deliberately a second,
//! independent route to the same cipher the crate's MACs build on.

const ROUNDS: usize = 10;

fn sbox(x: u8) -> u8 {
    // Multiplicative inverse in GF(2^8) followed by the affine map.
    const S: [u8; 256] = build_sbox();
    S[x as usize]
}

const fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    let mut i = 0;
    while i < 8 {
        if b & 1 != 0 {
            p ^= a;
        }
        let hi = a & 0x80;
        a <<= 1;
        if hi != 0 {
            a ^= 0x1B;
        }
        b >>= 1;
        i += 1;
    }
    p
}

const fn gf_inv(a: u8) -> u8 {
    // a^254 in GF(2^8); zero maps to zero.
    let mut result = 1u8;
    let mut base = a;
    let mut exp = 254;
    while exp > 0 {
        if exp & 1 != 0 {
            result = gf_mul(result, base);
        }
        base = gf_mul(base, base);
        exp >>= 1;
    }
    result
}

const fn build_sbox() -> [u8; 256] {
    let mut s = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let inv = gf_inv(i as u8);
        s[i] = inv
            ^ inv.rotate_left(1)
            ^ inv.rotate_left(2)
            ^ inv.rotate_left(3)
            ^ inv.rotate_left(4)
            ^ 0x63;
        i += 1;
    }
    s
}

fn expand_key(key: &[u8; 16]) -> [[u8; 16]; ROUNDS + 1] {
    let mut schedule = [[0u8; 16]; ROUNDS + 1];
    schedule[0] = *key;
    let mut rcon: u8 = 1;
    for round in 1..=ROUNDS {
        let prev = schedule[round - 1];
        let mut word = [prev[13], prev[14], prev[15], prev[12]];
        for b in &mut word {
            *b = sbox(*b);
        }
        word[0] ^= rcon;
        rcon = gf_mul(rcon, 2);
        for i in 0..4 {
            schedule[round][i] = prev[i] ^ word[i];
        }
        for i in 4..16 {
            schedule[round][i] = prev[i] ^ schedule[round][i - 4];
        }
    }
    schedule
}

fn sub_bytes(state: &mut [u8; 16]) {
    for b in state.iter_mut() {
        *b = sbox(*b);
    }
}

fn shift_rows(state: &mut [u8; 16]) {
    // Column-major state: byte (row r, col c) sits at index c*4 + r.
    let s = *state;
    for r in 1..4 {
        for c in 0..4 {
            state[c * 4 + r] = s[((c + r) % 4) * 4 + r];
        }
    }
}

fn mix_columns(state: &mut [u8; 16]) {
    for c in 0..4 {
        let col = [
            state[c * 4],
            state[c * 4 + 1],
            state[c * 4 + 2],
            state[c * 4 + 3],
        ];
        state[c * 4] = gf_mul(col[0], 2) ^ gf_mul(col[1], 3) ^ col[2] ^ col[3];
        state[c * 4 + 1] = col[0] ^ gf_mul(col[1], 2) ^ gf_mul(col[2], 3) ^ col[3];
        state[c * 4 + 2] = col[0] ^ col[1] ^ gf_mul(col[2], 2) ^ gf_mul(col[3], 3);
        state[c * 4 + 3] = gf_mul(col[0], 3) ^ col[1] ^ col[2] ^ gf_mul(col[3], 2);
    }
}

fn add_round_key(state: &mut [u8; 16], round_key: &[u8; 16]) {
    for (b, k) in state.iter_mut().zip(round_key) {
        *b ^= k;
    }
}

pub fn encrypt_block(key: &[u8; 16], block: &[u8; 16]) -> [u8; 16] {
    let schedule = expand_key(key);
    let mut state = *block;
    add_round_key(&mut state, &schedule[0]);
    for round_key in &schedule[1..ROUNDS] {
        sub_bytes(&mut state);
        shift_rows(&mut state);
        mix_columns(&mut state);
        add_round_key(&mut state, round_key);
    }
    sub_bytes(&mut state);
    shift_rows(&mut state);
    add_round_key(&mut state, &schedule[ROUNDS]);
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_vectors() {
        // Appendix round-trip vectors for the 128-bit key size.
        let key: [u8; 16] = (0..16u8).collect::<Vec<_>>().try_into().unwrap();
        let plain: [u8; 16] = hex::decode("00112233445566778899aabbccddeeff")
            .unwrap()
            .try_into()
            .unwrap();
        assert_eq!(
            hex::encode(encrypt_block(&key, &plain)),
            "69c4e0d86a7b0430d8cdb78070b4c55a"
        );
        assert_eq!(
            hex::encode(encrypt_block(&[0u8; 16], &[0u8; 16])),
            "66e94bd4ef8a2c3b884cfa59ca342b2e"
        );
    }
}
