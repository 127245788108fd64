int main(void) {
    unsigned char x = 0;
    while (x < 300) x++;
    return 0;
}
