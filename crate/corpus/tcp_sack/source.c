/* Sequence comparison through a signed 32-bit cast.
   Only meaningful inside a 2^31 sequence window. */
static int tcp_seq_lt(uint32_t a, uint32_t b) {
    return (int32_t)(a - b) < 0;
}

/* BUG: sack_start is not bounded to the window, so a value about 2^31
   away from both operands flips the sign in both calls at once. */
int is_in_hole(uint32_t sack_start,
               uint32_t rcv_nxt,
               uint32_t snd_una) {
    return tcp_seq_lt(sack_start, rcv_nxt)
        && tcp_seq_lt(snd_una, sack_start);
}
