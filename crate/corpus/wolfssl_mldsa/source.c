/* w1 is sword32; ML-DSA-44 range: [0, 43] */
static void dilithium_encode_w1_88_c(const sword32 *w1, word32 *w1e32, int j)
{
    w1e32[0] = (word32)(
        w1[j+0] | (w1[j+1] <<  6) | (w1[j+2] << 12) |
        (w1[j+3] << 18) | (w1[j+4] << 24) |
        (w1[j+5] << 30));  /* UB: any w1 >= 2 overflows */
    /* the outer (word32) cast applies to the whole OR, too late */
}

/* w1 is sword32; ML-DSA-65/87 range: [0, 15] */
static void dilithium_encode_w1_32_c(const sword32 *w1, word32 *w1e32, int j)
{
    w1e32[0] = (word32)(
        w1[j+0] | (w1[j+1] <<  4) | (w1[j+2] <<  8) |
        (w1[j+3] << 12) | (w1[j+4] << 16) | (w1[j+5] << 20) |
        (w1[j+6] << 24) | (w1[j+7] << 28));  /* UB: any w1 >= 8 overflows */
}
