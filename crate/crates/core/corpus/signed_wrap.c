int main(void) {
    signed char c = 1;
    while (c != 0) {
        c = c * 3;
    }
    return 0;
}
