typedef uint64_t CFE_ResourceId_t;

/* CFE_ResourceId_t is an opaque typedef.
   On 32-bit targets unsigned long is 32 bits wide. */
static inline unsigned long
CFE_ResourceId_ToInteger(CFE_ResourceId_t id)
{
    /* BUG: a 64-bit id loses its upper half here */
    return (unsigned long)CFE_RESOURCEID_UNWRAP(id);
}

/* Table sized from a count that was itself derived from a truncated id;
   each entry is 48 bytes. */
void *CFE_ES_AllocIdTable(uint32_t count)
{
    return malloc(count * 48);
}
