/* Inner TLV loop of the PROXY v2 SSL TLV parser. */
int proxy_v2_read_ssl_tlv(uint16_t len, uint16_t tlv_len)
{
    /* MISSING: if (3 + tlv_len > len) return ERR_INVAL; */
    len = (uint16_t)(len - (sizeof(uint8_t)*3
                          + tlv_len)); /* UNDERFLOW */
    /* when 3 + tlv_len > len the counter wraps near UINT16_MAX */
    return len;
}
