/* n comes from the wire; the record size is fixed. */
uint8_t *alloc_records(uint32_t n)
{
    uint32_t element_size = 16;
    /* BUG: n * element_size can wrap, giving a short buffer */
    uint8_t *buf = malloc((uint32_t)n * element_size);
    return buf;
}

uint8_t *alloc_records_checked(uint32_t n)
{
    uint32_t element_size = 16;
    if (n > 0x0FFFFFFF)
        return 0;
    uint8_t *buf = malloc((uint32_t)n * element_size);
    return buf;
}
