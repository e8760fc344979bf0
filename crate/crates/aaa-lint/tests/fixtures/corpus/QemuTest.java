import org.junit.Test;

public class QemuTest {
    @Test
    public void testCreateAndInfo(){
        QemuImg qemu = new QemuImg();
        QemuImgFile file = new QemuImgFile("disk");
        qemu.create(file);
        Map info = qemu.info(file);
        assertEquals(SIZE, info.size());}
}
