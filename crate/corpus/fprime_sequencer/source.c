/* Stack member access is stubbed through locals and a getter. */
U8 stack_bytes[1024];
U32 get_size(void);

I32 directive_eq(U32 stack_size)
{
    // "Now safe to compute size * 2"  <-- wrong
    if (stack_size < get_size() * 2) {   // CAN OVERFLOW
        return -1;
    }
    U64 lhsOffset = stack_size - get_size() * 2;
    U64 rhsOffset = stack_size - get_size();   // UNDERFLOW
    stack_size -= get_size() * 2;
    return stack_bytes[rhsOffset];
}
