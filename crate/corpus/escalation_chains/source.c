uint8_t window[4096];
uint8_t payload[4096];

static int tcp_seq_lt(uint32_t a, uint32_t b) {
    return (int32_t)(a - b) < 0;
}

/* The hole test passes, then the distance into the window indexes it. */
uint8_t sack_hole_byte(uint32_t sack_start, uint32_t rcv_nxt, uint32_t snd_una)
{
    if (tcp_seq_lt(sack_start, rcv_nxt) && tcp_seq_lt(snd_una, sack_start)) {
        uint32_t size_arg = sack_start - rcv_nxt;
        return window[size_arg];
    }
    return 0;
}

/* TLV remainder computed without a bound check, then used as an index. */
uint8_t tlv_tail_byte(uint32_t input_len, uint32_t tlv_len)
{
    uint32_t remaining = input_len - (3 + tlv_len);
    return payload[remaining];
}
